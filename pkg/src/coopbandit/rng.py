"""Deterministic random-stream plumbing.

All randomness in the package flows through PCG64 generators derived from a
single integer seed plus a key path, e.g. ``substream(seed, "losses")`` or
``substream(seed, "draws", cell, rep)``.  String key parts are hashed with
CRC-32 so the mapping is stable across platforms and releases; the resulting
words feed ``numpy.random.SeedSequence`` as a spawn key.  Two different key
paths give statistically independent streams, and the same path always gives
the same stream.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream"]


def substream(seed: int, *key: str | int) -> np.random.Generator:
    """Independent PCG64 generator for this (seed, key path)."""
    words = tuple(
        zlib.crc32(part.encode("utf-8")) if isinstance(part, str) else int(part)
        for part in key
    )
    for w in words:
        if w < 0:
            raise ValueError(f"integer key parts must be nonnegative, got {w}")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=words)
    return np.random.Generator(np.random.PCG64(seq))
