"""Projective-measurement emulation: snapshots, post-selection, jackknife.

Snapshots are z-basis configurations drawn by inverse-CDF over the state's
probability vector (sector states never touch the 2^L space). The RNG is
numpy's counter-based Philox bit generator seeded through SeedSequence;
numpy guarantees stream stability for a fixed bit generator, so snapshot
sets are reproducible across platforms. For parallel time points pass
seed=(root, time_index): the derived streams are independent and do not
depend on scheduling order.

Snapshot files are newline-delimited blocks: one JSON metadata line, then
one bitstring line (site 1 leftmost, '1' = up) per retained snapshot.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

from .model import StateVector, enumerate_sector

DEFAULT_SNAPSHOTS = 1500  # typical experimental depth per time point


@dataclass(frozen=True)
class SnapshotSet:
    """Measured z-basis configurations plus provenance metadata."""

    bits: np.ndarray  # (n_retained, L) uint8, 1 = up
    L: int
    seed: object
    n_total: int  # drawn before any post-selection
    t_J: float | None = None
    delta: float | None = None
    alpha: float | None = None
    postselected: int | None = None  # magnon number kept, None = raw

    def __post_init__(self):
        if self.postselected is not None and len(self.bits):
            counts = self.bits.sum(axis=1)
            if not np.all(counts == self.postselected):
                raise ValueError("post-selected set contains wrong magnon numbers")

    @property
    def n_retained(self):
        return len(self.bits)

    @property
    def retention(self):
        return self.n_retained / self.n_total if self.n_total else 0.0

    @property
    def empty(self):
        return self.n_retained == 0

    def bitstrings(self):
        return ["".join("1" if b else "0" for b in row) for row in self.bits]

    def metadata(self):
        return {
            "L": self.L,
            "seed": list(self.seed) if isinstance(self.seed, tuple) else self.seed,
            "n_total": self.n_total,
            "n_retained": self.n_retained,
            "t_J": self.t_J,
            "delta": self.delta,
            "alpha": self.alpha,
            "postselected": self.postselected,
        }


def _generator(seed):
    """Philox stream; seed is an int or a (root, stream_index) tuple."""
    if isinstance(seed, tuple):
        root, idx = seed
        seq = np.random.SeedSequence(root, spawn_key=(idx,))
    else:
        seq = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seq))


def sample_snapshots(psi, n_samples, seed, params=None, t_J=None):
    """Draw n_samples Born-rule configurations from psi.

    Inverse-CDF sampling over the probability vector; for sector states
    the configurations come from the sector's occupation lists, for full
    states the basis index is the bit pattern itself.
    """
    if not isinstance(psi, StateVector):
        raise ValueError("psi must be a StateVector")
    prob = np.abs(psi.data) ** 2
    total = prob.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"state is not normalized (sum p = {total:.6g})")
    cdf = np.cumsum(prob)
    cdf[-1] = 1.0
    rng = _generator(seed)
    idx = np.searchsorted(cdf, rng.random(n_samples), side="right")

    L = psi.L
    bits = np.zeros((n_samples, L), dtype=np.uint8)
    if psi.basis[0] == "sector":
        n = psi.basis[2]
        if n:
            occ = enumerate_sector(L, n).occupations
            bits[np.arange(n_samples)[:, None], occ[idx]] = 1
    else:
        bits = ((idx[:, None] >> np.arange(L)) & 1).astype(np.uint8)
    return SnapshotSet(
        bits=bits, L=L, seed=seed, n_total=n_samples, t_J=t_J,
        delta=getattr(params, "delta", None), alpha=getattr(params, "alpha", None),
    )


def postselect(snapshots, n):
    """Keep snapshots with exactly n up-spins; retention is recorded.

    An empty result is returned (not raised); its `empty` flag is set and
    downstream estimators refuse it.
    """
    keep = snapshots.bits.sum(axis=1) == n
    return replace(snapshots, bits=snapshots.bits[keep], postselected=n)


# ------------------------------------------------------------- estimators


def _require_counts(snapshots):
    if snapshots.empty:
        raise ValueError("no snapshots retained; cannot estimate")


def estimate_pup(snapshots):
    """Per-site up fraction <P_j>."""
    _require_counts(snapshots)
    return snapshots.bits.mean(axis=0)


def estimate_pupp(snapshots):
    """Adjacent-pair fraction <P_j P_{j+1}>, labels = left site."""
    _require_counts(snapshots)
    both = snapshots.bits[:, :-1] & snapshots.bits[:, 1:]
    return both.mean(axis=0)


def estimate_participation(snapshots):
    """Renormalized adjacent-pair participation from the pair fractions."""
    from .probes import bs_participation

    return bs_participation(estimate_pupp(snapshots), snapshots.L)


def jackknife(estimator, snapshots):
    """Delete-one jackknife (bias-corrected mean, standard error).

    estimator maps a SnapshotSet to a scalar or vector. For a plain
    sample mean the standard error reproduces std/sqrt(N) exactly.
    """
    _require_counts(snapshots)
    N = snapshots.n_retained
    if N < 2:
        raise ValueError(f"jackknife needs at least 2 snapshots, got {N}")
    full = np.asarray(estimator(snapshots), dtype=float)
    parts = np.empty((N,) + full.shape)
    sel = np.ones(N, dtype=bool)
    for i in range(N):
        sel[i] = False
        parts[i] = estimator(replace(snapshots, bits=snapshots.bits[sel]))
        sel[i] = True
    mean_parts = parts.mean(axis=0)
    corrected = N * full - (N - 1) * mean_parts
    err = np.sqrt((N - 1) / N * np.sum((parts - mean_parts) ** 2, axis=0))
    if full.shape == ():
        return float(corrected), float(err)
    return corrected, err


# ------------------------------------------------------------- file format


def save_snapshots(path, snapshot_sets):
    """Write blocks of one JSON metadata line plus bitstring lines."""
    if isinstance(snapshot_sets, SnapshotSet):
        snapshot_sets = [snapshot_sets]
    with open(path, "w") as fh:
        for s in snapshot_sets:
            fh.write(json.dumps(s.metadata()) + "\n")
            for line in s.bitstrings():
                fh.write(line + "\n")


def load_snapshots(path):
    """Read back every block written by save_snapshots."""
    sets = []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    i = 0
    while i < len(lines):
        meta = json.loads(lines[i])
        i += 1
        n = meta["n_retained"]
        rows = lines[i: i + n]
        i += n
        if len(rows) != n or any(len(r) != meta["L"] for r in rows):
            raise ValueError(f"corrupt snapshot block in {path}")
        bits = np.array([[c == "1" for c in r] for r in rows], dtype=np.uint8)
        bits = bits.reshape(n, meta["L"])
        seed = meta["seed"]
        sets.append(
            SnapshotSet(
                bits=bits, L=meta["L"],
                seed=tuple(seed) if isinstance(seed, list) else seed,
                n_total=meta["n_total"], t_J=meta["t_J"], delta=meta["delta"],
                alpha=meta["alpha"], postselected=meta["postselected"],
            )
        )
    return sets
