"""Magnon spectra: one-magnon dispersion, two-magnon momentum blocks, L4 map.

One-magnon dispersion (energy relative to the all-down state):

    eps1(k) = (4J/3) sum_{l>=1} (cos(k l) - delta) / l^alpha

'infinite' mode evaluates the series exactly through polylogarithms,
Re Li_alpha(e^{ik}) and zeta(alpha); 'ring' mode is the exact finite sum
for a ring of L sites, where for even L the antipodal term l = L/2 enters
with weight 1/2 (each site has a single antipode).

Two-magnon states on the ring are organized by total momentum k = 2 pi m / L
into blocks over the relative distance d.  The block basis is

    |k; d> ~ sum_j e^{i k (j + d/2)} |up_j, up_{j+d}>,   d = 1 .. floor(L/2)

(the d = L/2 state exists only for even m when L is even).  The highest
eigenstate of a block is the repulsively bound pair candidate; its inverse
participation ratio L4 = sum_d |psi(d)|^4 over the unfolded relative
coordinate d = 1 .. L-1 separates bound (L4 above 5/(L-1)) from extended
states (L4 of order 1/(L-1)).
"""

from dataclasses import dataclass, replace

import mpmath as mp
import numpy as np

from .model import coupling_matrix, sector_hamiltonian, vacuum_energy

BOUND_THRESHOLD_NUM = 5.0  # bound if L4 > 5/(L-1)
LOCALIZED_CHECK_NUM = 3.0  # sanity floor used in tests


def _check_k(k, allow_zero=False):
    k = np.atleast_1d(np.asarray(k, dtype=float))
    lo = -1e-12 if allow_zero else 1e-12
    if np.any(k < lo) or np.any(k > np.pi + 1e-12):
        raise ValueError("momentum k must lie in (0, pi]")
    return k


def dispersion_one(k, params, mode="infinite", tol=1e-12):
    """One-magnon dispersion eps1(k), in units of params.J.

    mode 'infinite': exact series limit via polylogarithms (tol sets the
    working precision).  mode 'ring': exact finite ring sum for params.L.
    Accepts a scalar or array k in [0, pi]; returns matching shape.
    """
    scalar = np.isscalar(k)
    k = _check_k(k, allow_zero=True)
    J, alpha, delta = params.J, params.alpha, params.delta
    if mode == "infinite":
        if alpha <= 1:
            raise ValueError("infinite-chain series requires alpha > 1")
        with mp.workdps(max(15, int(-np.log10(tol)) + 6)):
            zeta = float(mp.zeta(alpha))
            cos_part = np.array(
                [float(mp.re(mp.polylog(alpha, mp.expj(ki)))) for ki in k]
            )
        eps = 4.0 * J / 3.0 * (cos_part - delta * zeta)
    elif mode == "ring":
        L = params.L
        ell = np.arange(1, (L + 1) // 2, dtype=float)
        w = np.ones_like(ell)
        if L % 2 == 0:
            ell = np.append(ell, L / 2.0)
            w = np.append(w, 0.5)
        terms = w / ell**alpha
        eps = 4.0 * J / 3.0 * (
            np.cos(np.outer(k, ell)) @ terms - delta * terms.sum()
        )
    else:
        raise ValueError(f"unknown dispersion mode {mode!r}")
    return float(eps[0]) if scalar else eps


def group_velocity_one(k, params, tol=1e-12):
    """Signed group velocity v(k) = -(4J/3) sum_l sin(k l) l^(1-alpha).

    Evaluated as -(4J/3) Im Li_{alpha-1}(e^{ik}).  For 1 < alpha <= 2 the
    magnitude grows without bound as k -> 0+ (dispersion cusp at k = 0).
    """
    scalar = np.isscalar(k)
    k = _check_k(k)
    with mp.workdps(max(15, int(-np.log10(tol)) + 6)):
        sin_part = np.array(
            [float(mp.im(mp.polylog(params.alpha - 1.0, mp.expj(ki)))) for ki in k]
        )
    v = -4.0 * params.J / 3.0 * sin_part
    return float(v[0]) if scalar else v


def quantized_momenta(L, positive=True):
    """Ring momenta 2 pi m / L; positive=True keeps m = 1 .. floor(L/2)."""
    ms = np.arange(1, L // 2 + 1) if positive else np.arange(L)
    return 2.0 * np.pi * ms / L


@dataclass
class TwoMagnonBlock:
    """Momentum-k block of the two-magnon ring sector, H = kinetic + delta * u."""

    k: float
    m: int
    L: int
    distances: np.ndarray  # physical relative distances d
    kinetic: np.ndarray  # hopping part, Hermitian, delta-independent
    u_diag: np.ndarray  # zz diagonal per unit delta (includes vacuum part)
    params: object

    @property
    def dim(self):
        return len(self.distances)

    def hamiltonian(self, delta=None):
        if delta is None:
            delta = self.params.delta
        return self.kinetic + np.diag(delta * self.u_diag)

    def eigensystem(self, delta=None):
        return np.linalg.eigh(self.hamiltonian(delta))


def two_magnon_block(k, params, d_max=None):
    """Build the two-magnon block at ring momentum k = 2 pi m / L.

    d_max truncates the relative distance basis (defaults to floor(L/2),
    the exact block).  Energies are absolute: the union over all m is
    isospectral to the two-magnon ring sector Hamiltonian.
    """
    if params.boundary != "ring":
        raise ValueError("two-magnon momentum blocks require boundary='ring'")
    L = params.L
    m_float = k * L / (2.0 * np.pi)
    m = int(round(m_float))
    if abs(m_float - m) > 1e-9:
        raise ValueError(f"k={k} is not a ring momentum 2*pi*m/L for L={L}")
    m %= L

    # coupling by directed separation, cyclic distance
    x = np.arange(L, dtype=float)
    dc = np.minimum(x, L - x)
    Jc = np.zeros(L)
    Jc[1:] = params.J / dc[1:] ** params.alpha

    dmax_full = L // 2
    dist = np.arange(1, dmax_full + 1)
    if L % 2 == 0 and m % 2 == 1:
        dist = dist[:-1]  # antipodal pair state vanishes at odd m
    if d_max is not None:
        if d_max > dmax_full:
            raise ValueError(f"d_max={d_max} exceeds floor(L/2)={dmax_full}")
        dist = dist[dist <= d_max]
    nd = len(dist)

    # extended-label hop amplitude for d -> d' with all pairs listed as
    # (j, j+d), d = 1..L-1: both one-magnon moves change d by l = d'-d mod L
    dp = dist[:, None].astype(float)  # d' rows
    d0 = dist[None, :].astype(float)  # d  cols
    sgn = -1.0 if m % 2 else 1.0

    def hop(dprime, d):
        s = dprime - d
        ell = np.mod(s, L).astype(int)
        amp = 2.0 / 3.0 * Jc[ell] * (
            np.exp(1j * k * (ell - s / 2.0)) + np.exp(-1j * k * s / 2.0)
        )
        return np.where(ell == 0, 0.0, amp)

    M1 = hop(dp, d0)
    M2 = hop(L - dp, d0)  # fold of the reflected label L-d'
    antipode = np.isclose(dp, L / 2.0)
    kin = M1 + sgn * np.where(antipode, 0.0, M2)

    # normalization: |k,d> carries sqrt(2) relative to the antipodal state
    c = np.where(np.isclose(dist, L / 2.0), 1.0, np.sqrt(2.0))
    kin = kin * (c[None, :] / c[:, None])

    herm_err = np.max(np.abs(kin - kin.conj().T)) if nd else 0.0
    if herm_err > 1e-10 * max(params.J, 1.0):
        raise AssertionError(f"two-magnon block not Hermitian: {herm_err}")
    kin = 0.5 * (kin + kin.conj().T)

    # zz diagonal: (delta/3)(S_tot - 4R + 4 J(d)); S_tot part = vacuum energy
    R = Jc[1:].sum()
    S_tot = L * R / 2.0
    u = (S_tot - 4.0 * R + 4.0 * Jc[dist]) / 3.0

    return TwoMagnonBlock(
        k=k, m=m, L=L, distances=dist, kinetic=kin, u_diag=u, params=params
    )


def unfold_relative_weights(block, vec):
    """|psi(d)|^2 over the full directed range d = 1 .. L-1.

    Block components at d < L/2 split evenly between d and L-d; the
    antipodal component (if present) maps to d = L/2 alone.
    """
    L = block.L
    w = np.zeros(L - 1)
    for d, amp in zip(block.distances, vec):
        p = abs(amp) ** 2
        if 2 * d == L:
            w[d - 1] = p
        else:
            w[d - 1] += 0.5 * p
            w[L - d - 1] += 0.5 * p
    return w


def l4_norm(psi):
    """sum |psi_d|^4 for a normalized relative-coordinate wavefunction."""
    psi = np.asarray(psi)
    nrm = np.sum(np.abs(psi) ** 2)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"wavefunction not normalized: |psi|^2 = {nrm}")
    return float(np.sum(np.abs(psi) ** 4))


def l4_of_weights(w):
    """L4 from probability weights (sum w = 1)."""
    return float(np.sum(np.asarray(w) ** 2))


def bound_threshold(L):
    return BOUND_THRESHOLD_NUM / (L - 1)


@dataclass
class DispersionCurve:
    k: np.ndarray
    energy: np.ndarray  # excitation energy (relative to the vacuum)
    l4: np.ndarray
    bound: np.ndarray
    params: object
    label: str = ""


def dispersion_two(k_values, params, d_max=None):
    """Highest two-magnon eigenstate per ring momentum k.

    Returns excitation energies eps2(k) - eps0 together with the L4 norm
    of the relative wavefunction and a bound flag (L4 above 5/(L-1));
    an unset flag marks the state as merged with the pair continuum.
    """
    k_values = np.atleast_1d(np.asarray(k_values, dtype=float))
    e0 = vacuum_energy(params)
    thr = bound_threshold(params.L)
    energies, l4s, flags = [], [], []
    for k in k_values:
        block = two_magnon_block(k, params, d_max=d_max)
        vals, vecs = block.eigensystem()
        top = vecs[:, -1]
        w = unfold_relative_weights(block, top)
        l4 = l4_of_weights(w)
        energies.append(vals[-1] - e0)
        l4s.append(l4)
        flags.append(l4 > thr)
    return DispersionCurve(
        k=k_values,
        energy=np.array(energies),
        l4=np.array(l4s),
        bound=np.array(flags),
        params=params,
    )


@dataclass
class PhaseDiagram:
    k: np.ndarray
    delta: np.ndarray
    l4: np.ndarray  # (n_k, n_delta)
    threshold: float
    params: object

    @property
    def bound(self):
        return self.l4 > self.threshold

    def onset_delta(self):
        """Smallest delta in the grid with any bound momentum, or None."""
        cols = np.nonzero(self.bound.any(axis=0))[0]
        return float(self.delta[cols[0]]) if len(cols) else None


def phase_diagram(params, k_values=None, deltas=None, threads=1):
    """L4 of the top two-magnon state over a (k, delta) grid on the ring.

    The block kinetic part is built once per k and reused across delta
    (the zz diagonal is linear in delta); rows are independent, so the k
    loop optionally fans out over a thread pool.
    """
    if k_values is None:
        k_values = quantized_momenta(params.L)
    if deltas is None:
        deltas = np.arange(0.0, 4.01, 0.25)
    k_values = np.asarray(k_values, dtype=float)
    deltas = np.asarray(deltas, dtype=float)

    def row(k):
        block = two_magnon_block(k, params)
        out = np.empty(len(deltas))
        for idx, dl in enumerate(deltas):
            vals, vecs = block.eigensystem(delta=dl)
            out[idx] = l4_of_weights(unfold_relative_weights(block, vecs[:, -1]))
        return out

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, k_values))
    else:
        rows = [row(k) for k in k_values]
    return PhaseDiagram(
        k=k_values,
        delta=deltas,
        l4=np.array(rows),
        threshold=bound_threshold(params.L),
        params=params,
    )


def open_chain_top_l4(params, deltas):
    """Open-chain comparison: L4 of the top two-magnon eigenstate per delta.

    Sector ED without momentum resolution; the relative-distance weights
    are |psi(d)|^2 = sum_j |amp(j, j+d)|^2, d = 1 .. L-1.
    """
    out = np.empty(len(deltas))
    for i, dl in enumerate(deltas):
        op = sector_hamiltonian(replace(params, delta=float(dl), boundary="open"), 2)
        vals, vecs = op.eigensystem()
        top = vecs[:, -1]
        occ = op.basis.occupations
        d = occ[:, 1] - occ[:, 0]
        w = np.zeros(params.L - 1)
        np.add.at(w, d - 1, np.abs(top) ** 2)
        out[i] = l4_of_weights(w)
    return out


@dataclass
class TailProfile:
    distances: np.ndarray
    prob_rel: np.ndarray  # |psi(d)|^2 / |psi(1)|^2
    xi: float  # exponential decay length from the short-distance fit
    power: float  # log-log slope of the far tail


def wavefunction_tails(k, params, fit_range=None):
    """Relative-distance profile of the top two-magnon state at momentum k.

    Fits log prob = a - d/xi over short distances (default d <= 8) and a
    power law over the outer half of the chain, where the algebraic
    coupling tail takes over from the exponential bound-state core.

    Both fits run on the populated distances only: at k = pi the pair hop
    amplitude 2 cos(k l / 2) kills all odd moves, so one distance parity
    carries the whole state and the other sits at numerical zero.
    """
    block = two_magnon_block(k, params)
    vals, vecs = block.eigensystem()
    w = unfold_relative_weights(block, vecs[:, -1])
    half = np.arange(1, block.L)[: block.L // 2]
    prob = w[: block.L // 2] / w[0]

    live = prob > 1e-18  # relative to the d = 1 weight
    d_live, p_live = half[live], prob[live]

    d_exp = fit_range or 8
    core = d_live <= d_exp
    if core.sum() < 2:
        raise ValueError(f"no support below d = {d_exp} to fit a decay length")
    coef = np.polyfit(d_live[core], np.log(p_live[core]), 1)
    xi = -1.0 / coef[0] if coef[0] < 0 else np.inf

    outer = slice(len(d_live) // 2, len(d_live))
    pw = np.polyfit(np.log(d_live[outer]), np.log(p_live[outer]), 1)[0]
    return TailProfile(distances=half, prob_rel=prob, xi=xi, power=pw)
