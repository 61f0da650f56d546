"""Seed derivation for reproducible, platform-independent random streams.

Every stochastic step in the package draws from a numpy ``Generator`` backed by
PCG64, seeded with a 64-bit value derived from a master seed and a tuple of
task indices via splitmix64 mixing.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """One splitmix64 output for the given 64-bit state."""
    z = (state + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *parts: int) -> int:
    """Fold ``parts`` into ``master`` to get an independent 64-bit seed."""
    s = splitmix64(int(master) & _MASK)
    for p in parts:
        s = splitmix64(s ^ (int(p) & _MASK))
    return s


def make_rng(master: int, *parts: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, *parts)))
