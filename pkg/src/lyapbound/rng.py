"""Seeded generators with a fixed stream-split rule.

A run seed plus a key tuple (trial index, grid index, ...) determines the
stream: ``PCG64(SeedSequence(seed, spawn_key=key))``. Different keys give
statistically independent streams, and the mapping does not depend on how
work is distributed over threads.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for stream ``key`` of run ``seed``."""
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
