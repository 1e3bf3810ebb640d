"""Deterministic random streams.

A stream is a (seed, stream) pair. Every consumer asks the stream for a numpy
Generator for a named purpose ("edges", "weights", ...) so that two samplers
sharing a stream can be coupled on the draws they have in common.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0

    # purpose ids are part of the reproducibility contract: never renumber
    PURPOSES: ClassVar[dict[str, int]] = {
        'main': 0,
        'edges': 1,
        'weights': 2,
        'points': 3,
        'sites': 4,
        'stubs': 5,
        'degrees': 6,
        'pairs': 7,
        'bootstrap': 8,
        'jitter': 9,
    }

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= self.stream <= _MASK64:
            raise ValueError(f"stream must be a 64-bit unsigned integer, got {self.stream}")

    def generator(self, purpose: str = 'main') -> np.random.Generator:
        try:
            pid = self.PURPOSES[purpose]
        except KeyError:
            raise KeyError(f"Unknown random purpose: {purpose}") from None
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, pid))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> RngStream:
        """Stream for replicate/grid index `index` derived from this one."""
        return RngStream(self.seed, derive_stream(self.seed, self.stream, index))


def derive_stream(seed: int, *indices: int) -> int:
    """Hash (seed, indices...) to a 64-bit stream id, stable across platforms."""
    key = ':'.join(str(i) for i in (seed, *indices)).encode('ascii')
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), 'little')


def fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy & _MASK64)
