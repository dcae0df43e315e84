"""Deterministic per-trial random generators.

Every Monte Carlo trial draws from a generator keyed by (master seed,
trial index) through a fixed 64-bit mixing function, so results are
bit-reproducible regardless of scheduling or thread budget.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def mix64(master_seed: int, index: int) -> int:
    """SplitMix64 finalizer applied to the master seed advanced by index."""
    z = (int(master_seed) + (int(index) + 1) * _GAMMA) & _MASK
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK
    z ^= z >> 31
    return z


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for one trial; stable across platforms."""
    return np.random.Generator(np.random.PCG64(mix64(master_seed, index)))
