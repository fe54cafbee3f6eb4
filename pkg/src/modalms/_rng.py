"""Counter-based random sub-streams.

A stream is identified by a master seed plus a tuple of integer keys, so the
draws of one stage never depend on how many draws another stage consumed or
on the order in which stages run.
"""
from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.SeedSequence"


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        raise TypeError("pass a seed or SeedSequence, not a Generator, where sub-streams are derived")
    return np.random.SeedSequence(int(seed))


def substream(seed, *keys: int) -> np.random.SeedSequence:
    ss = as_seed_sequence(seed)
    return np.random.SeedSequence(entropy=ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in keys))


def generator(seed, *keys: int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator) and not keys:
        return seed
    return np.random.Generator(np.random.PCG64(substream(seed, *keys)))
