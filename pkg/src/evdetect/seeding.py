"""Deterministic 64-bit seed derivation.

Every random draw in this package flows from one user-supplied seed.
Sub-seeds (per feeder, per household, per tree) are derived positionally
with `mix_seed`, never by consuming a shared stream, so results do not
depend on generation order or parallelism.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(z: int) -> int:
    """One SplitMix64 step (Steele, Lea & Flood finalizer constants)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def mix_seed(*parts: int) -> int:
    """Fold integer parts into one 64-bit seed.

    mix_seed(s, a, b) == splitmix64(splitmix64(splitmix64(0) ^ s) ^ a) ^ ...
    folded left to right; the exact recurrence is
    ``acc <- splitmix64(acc ^ (part mod 2**64))`` starting from acc = 0.
    """
    acc = 0
    for part in parts:
        acc = splitmix64(acc ^ (part & _MASK64))
    return acc


def rng_from(*parts: int) -> np.random.Generator:
    """PCG64 generator seeded positionally from the given parts."""
    return np.random.Generator(np.random.PCG64(mix_seed(*parts)))
