"""Magnon dynamics, bound states, and snapshot entropies in long-range XXZ chains."""

__version__ = "0.1.0"
