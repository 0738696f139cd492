"""Deterministic seed derivation and random-generator construction.

All randomness in the package flows through counter-based Philox generators
keyed by 64-bit seeds, and all derived seeds (per game, per initial
condition, per sweep cell) are produced by a splitmix64-style finalizer so
that runs are reproducible across platforms and independent of scheduling.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# splitmix64 constants (Steele, Lea, Flood 2014)
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

RNG_ALGORITHM = "philox4x64 (numpy.random.Philox); seed derivation: splitmix64 finalizer"


def splitmix64(value: int) -> int:
    """One splitmix64 output step for a 64-bit input."""
    z = (value + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_seed(base: int, *indices: int) -> int:
    """Derive a child seed from a base seed and a tuple of indices.

    Deterministic, order-sensitive, and well-spread: each index is folded
    into the state and passed through the splitmix64 finalizer.
    """
    h = base & MASK64
    for v in indices:
        h = splitmix64(h ^ (int(v) & MASK64))
    return h


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & MASK64))
