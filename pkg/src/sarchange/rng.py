"""Deterministic counter-based random numbers.

SplitMix64 keyed by (seed, draw index): draw i mixes seed + (i+1)*GAMMA with
the standard 64-bit finalizer, so a stream is a pure function of its seed and
how many draws came before. Everything stochastic in the package funnels
through one of these, derived from a single root seed, which is what makes
runs bitwise reproducible.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = 0xFFFFFFFFFFFFFFFF

_U53 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)


def _finalize(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _fnv1a(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


class Rng:
    """One SplitMix64 stream; ``derive`` forks independent child streams."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._drawn = 0

    def __repr__(self):
        return f"Rng(seed={self.seed:#x}, drawn={self._drawn})"

    def derive(self, tag: str) -> "Rng":
        """Child stream keyed by tag. Does not consume draws from this one."""
        # Array form: numpy warns on scalar uint64 overflow but wraps arrays.
        mixed = _finalize(np.array([self.seed ^ _fnv1a(tag)], dtype=np.uint64))
        return Rng(int(mixed[0]))

    def raw(self, n: int) -> np.ndarray:
        """Next n raw 64-bit words as a uint64 array."""
        if n < 0:
            raise ValueError(f"draw count must be >= 0, got {n}")
        idx = np.arange(self._drawn + 1, self._drawn + n + 1, dtype=np.uint64)
        self._drawn += n
        return _finalize(idx * _GAMMA + np.uint64(self.seed))

    def uniform(self, n: int | None = None, low: float = 0.0, high: float = 1.0):
        """Floats in [low, high); 53-bit resolution. Scalar when n is None."""
        k = 1 if n is None else n
        u = (self.raw(k) >> _U53).astype(np.float64) * _INV53
        if low != 0.0 or high != 1.0:
            u = low + (high - low) * u
        return float(u[0]) if n is None else u

    def exponential(self, n: int | None = None):
        """Unit-mean exponential draws via inversion (never hits log(0))."""
        k = 1 if n is None else n
        u = (self.raw(k) >> _U53).astype(np.float64) * _INV53
        e = -np.log1p(-u)
        return float(e[0]) if n is None else e

    def _index(self, word: np.uint64, bound: int) -> int:
        # Integer modulo keeps index draws exact on every platform; the
        # modulo bias at 64 bits is far below anything observable here.
        return int(word) % bound

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        order = np.arange(n, dtype=np.int64)
        if n < 2:
            return order
        words = self.raw(n - 1)
        for j in range(n - 1, 0, -1):
            k = self._index(words[n - 1 - j], j + 1)
            order[j], order[k] = order[k], order[j]
        return order

    def sample(self, n: int, k: int) -> np.ndarray:
        """k distinct indices drawn without replacement from range(n)."""
        if k > n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        pool = np.arange(n, dtype=np.int64)
        words = self.raw(k)
        for j in range(k):
            t = j + self._index(words[j], n - j)
            pool[j], pool[t] = pool[t], pool[j]
        return pool[:k].copy()
