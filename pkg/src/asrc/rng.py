"""Deterministic randomness with named, splittable sub-streams.

Every stochastic component draws from its own child stream so that adding
draws in one module can never shift the stream seen by another.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SeededRng:
    """A 64-bit seed from which independent PCG64 generators are derived."""

    seed: int

    def root(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed))

    def stream(self, label: str) -> np.random.Generator:
        """Child generator keyed by a stable hash of ``label``."""
        key = zlib.crc32(label.encode("utf-8"))
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(key,))
        return np.random.default_rng(seq)
