"""Seeded random streams.

Every run owns one 64-bit seed. Independent components (source initial
condition, connectivity, input weights, replica start, noise) draw from named
substreams of that seed so each one is reproducible on its own.
"""

from __future__ import annotations

import numpy as np

STREAMS = {
    "source": 0,
    "connectivity": 1,
    "input": 2,
    "r0": 3,
    "noise": 4,
    "reservoir": 5,
    "fresh": 6,
}

SEED_MASK = (1 << 64) - 1


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """PCG64 generator for substream ``name`` of ``seed``.

    ``extra`` integers extend the spawn key (e.g. a trajectory index).
    """
    key = (STREAMS[name], *extra)
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Derive a child 64-bit seed from ``seed`` and an integer key path.

    Sweeps use ``derive_seed(root_seed, value_index, repetition)``.
    """
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
