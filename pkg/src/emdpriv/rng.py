"""Deterministic, splittable random state.

All sampling in this package goes through an explicit ``RngState``; there is
no hidden global generator. The same seed always reproduces the same stream
bit for bit. ``child`` derives statistically independent sub-states from the
seed and an index key, so harnesses can fan out work (per trial, per
document, per sweep cell) and stay reproducible regardless of execution
order; ``fork`` draws a fresh state from the current stream position.
"""

from __future__ import annotations

import numpy as np

_MAX_SEED = 2**64


class RngState:
    """A seeded PCG64 generator plus its derivation key."""

    def __init__(self, seed: int, _spawn_key: tuple[int, ...] = ()):
        if not 0 <= int(seed) < _MAX_SEED:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self._spawn_key = tuple(int(k) for k in _spawn_key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self._spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def child(self, *key: int) -> "RngState":
        """Sub-state derived from (seed, key); independent of stream position."""
        return RngState(self.seed, self._spawn_key + key)

    def fork(self) -> "RngState":
        """Fresh state seeded from the next value of this stream."""
        return RngState(int(self.generator.integers(0, _MAX_SEED, dtype=np.uint64)))

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, key={self._spawn_key})"
