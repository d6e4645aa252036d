"""Deterministic derivation of child RNG streams.

Every randomized routine takes one integer seed and derives independent
substreams from it via SeedSequence entropy paths, so results do not depend
on evaluation order or worker scheduling. Stream tags keep substreams for
different purposes (k-means restarts, shuffle replicas, dropout, ...) from
colliding when they share a master seed.
"""

from __future__ import annotations

import numpy as np

STREAM_KMEANS = 1
STREAM_SHUFFLE = 2
STREAM_STUB = 3
STREAM_TAGS = 4
STREAM_INIT = 5
STREAM_DATA = 6
STREAM_DROPOUT = 7
STREAM_BATCHES = 8


def child_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream identified by ``path`` under ``seed``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(entropy=[int(seed), *map(int, path)]))
