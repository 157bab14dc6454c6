"""Reproducible random streams for instance generation.

Every instance is generated from a Philox4x64-10 counter-based stream keyed
directly by the user seed (``key = (seed, 0)``, counter starting at zero), as
exposed by :class:`numpy.random.Philox`.  Raw 64-bit words are turned into
variates by transforms fixed here, so an instance can be re-derived in any
language that has Philox4x64-10:

* uniform on [0, 1): ``(word >> 11) * 2**-53``
* standard normal: Box-Muller on consecutive uniform pairs ``(u1, u2)``,
  ``sqrt(-2 log(1 - u1)) * cos(2 pi u2)`` then ``... * sin(2 pi u2)``.
"""

from __future__ import annotations

import numpy as np

_TWO_POW_M53 = 2.0 ** -53


class CounterStream:
    """Sequential reader over a Philox stream keyed by ``seed``."""

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self._bits = np.random.Philox(key=np.array([seed, 0], dtype=np.uint64))

    def words(self, n: int) -> np.ndarray:
        return self._bits.random_raw(int(n)).astype(np.uint64)

    def uniform(self, n: int) -> np.ndarray:
        return (self.words(n) >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53

    def normal(self, n: int) -> np.ndarray:
        n = int(n)
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = radius * np.cos(angle)
        z[:, 1] = radius * np.sin(angle)
        return z.reshape(-1)[:n]

    def sample_without_replacement(self, population: int, count: int) -> np.ndarray:
        """Partial Fisher-Yates shuffle; one uniform per drawn position."""
        idx = np.arange(population)
        u = self.uniform(count)
        for i in range(count):
            j = i + int(u[i] * (population - i))
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:count].copy()
