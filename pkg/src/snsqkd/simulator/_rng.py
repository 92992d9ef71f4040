"""Counter-based uniforms: one independent draw per (seed, index, slot).

The generator is the SplitMix64 output function evaluated at a counter, so
any window can be regenerated without touching the others. The Cython kernel
implements the same arithmetic and produces the same bits.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
SLOTS = 16
INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int) -> int:
    """Key derived from a user seed; negative seeds wrap modulo 2**64."""
    return mix64((seed & MASK64) + GOLDEN)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def uniforms(key: int, index: np.ndarray, slot: int) -> np.ndarray:
    """Doubles in [0, 1) for every entry of ``index`` at the given slot."""
    ctr = index.astype(np.uint64) * np.uint64(SLOTS) + np.uint64(slot + 1)
    z = ctr * np.uint64(GOLDEN) + np.uint64(key)
    return (_mix64_array(z) >> np.uint64(11)).astype(np.float64) * INV53


def uniform(key: int, index: int, slot: int) -> float:
    ctr = (index * SLOTS + slot + 1) & MASK64
    return (mix64(ctr * GOLDEN + key) >> 11) * INV53
