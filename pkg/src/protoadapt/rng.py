"""Portable seedable random number generation.

Reproducibility across platforms and library versions matters more here than
statistical sophistication, so randomness is generated by SplitMix64
(Steele, Lea & Flood 2014): a 64-bit-state generator defined by three shifts,
two multiplies and one additive constant. The exact same byte-level stream is
produced on every platform for a given seed, which keeps clustering results
bitwise reproducible.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """SplitMix64 generator with 64-bit state.

    next_u64 advances the state by the golden-gamma constant and applies the
    standard avalanche mix. Floats are built from the top 53 bits, giving a
    uniform double in [0, 1).
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def randint_below(self, n: int) -> int:
        """Uniform integer in [0, n). Bias from the float path is O(n / 2^53)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.next_float() * n), n - 1)

    def choice_weighted(self, cumulative: np.ndarray) -> int:
        """Index drawn with probability proportional to the weight increments.

        `cumulative` is a nondecreasing float64 cumulative-sum array whose last
        entry is the total weight (must be > 0).
        """
        total = float(cumulative[-1])
        if not total > 0.0:
            raise ValueError("total weight must be positive")
        r = self.next_float() * total
        idx = int(np.searchsorted(cumulative, r, side="right"))
        return min(idx, len(cumulative) - 1)
