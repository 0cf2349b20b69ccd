"""Portable seeded randomness.

All dataset splits, weight initialization, dropout masks, and mask sampling
draw from :class:`RngStream`, a splitmix64-seeded xoshiro256** generator
implemented in plain integer arithmetic so identical seeds give identical
sequences on every platform and numpy version.

A stream is single-owner: never share one across threads. Parallel work
should derive independent child streams via :meth:`RngStream.child`.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_INV_2_53 = 2.0 ** -53


def _splitmix64_step(state: int) -> tuple[int, int]:
    """One splitmix64 update; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, key: int) -> int:
    """Deterministic child seed: the ``key``-th splitmix64 output of ``seed``.

    O(key); intended for small keys such as epoch or trial indices.
    """
    if key < 0:
        raise ValueError("key must be non-negative")
    state = seed & _MASK64
    out = 0
    for _ in range(key + 1):
        state, out = _splitmix64_step(state)
    return out


class RngStream:
    """xoshiro256** generator with a fixed, portable seeding procedure."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        state = self.seed
        words = []
        for _ in range(4):
            state, out = _splitmix64_step(state)
            words.append(out)
        if not any(words):  # all-zero state is the one forbidden fixed point
            words[0] = 1
        self._s = words
        self._spare_normal: float | None = None

    def child(self, key: int) -> "RngStream":
        """Independent stream derived from this stream's seed and ``key``."""
        return RngStream(derive_seed(self.seed, key))

    def next_uint64(self) -> int:
        """Next raw 64-bit output."""
        s0, s1, s2, s3 = self._s
        x = (s1 * 5) & _MASK64
        result = ((((x << 7) | (x >> 57)) & _MASK64) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s = [s0, s1, s2, s3]
        return result

    def _raw_block(self, n: int) -> list[int]:
        # Inlined next_uint64 loop; the hot path for dropout masks.
        s0, s1, s2, s3 = self._s
        out = [0] * n
        for i in range(n):
            x = (s1 * 5) & _MASK64
            out[i] = ((((x << 7) | (x >> 57)) & _MASK64) * 9) & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s = [s0, s1, s2, s3]
        return out

    def uniform(self, size=None):
        """Uniform draws in [0, 1) with 53-bit resolution."""
        if size is None:
            return (self.next_uint64() >> 11) * _INV_2_53
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        raw = np.array(self._raw_block(n), dtype=np.uint64)
        vals = (raw >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return vals.reshape(shape)

    def normal(self, size=None):
        """Standard normal draws via the Box-Muller transform."""
        if size is None:
            return self._next_normal()
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        vals = np.empty(n, dtype=np.float64)
        for i in range(n):
            vals[i] = self._next_normal()
        return vals.reshape(shape)

    def _next_normal(self) -> float:
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = 1.0 - self.uniform()  # (0, 1]: log is always defined
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_normal = r * math.sin(theta)
        return r * math.cos(theta)

    def bernoulli(self, p: float, size=None):
        """Bernoulli(p) draws; arrays are float64 of 0.0/1.0."""
        if size is None:
            return 1 if self.uniform() < p else 0
        return (self.uniform(size) < p).astype(np.float64)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        span = _MASK64 + 1
        limit = span - span % n
        while True:
            r = self.next_uint64()
            if r < limit:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> np.ndarray:
        """Shuffled ``arange(n)``."""
        idx = list(range(n))
        self.shuffle(idx)
        return np.array(idx, dtype=np.int64)


def seeded_stream(seed: int) -> RngStream:
    """The package-wide entry point for reproducible randomness."""
    return RngStream(seed)
