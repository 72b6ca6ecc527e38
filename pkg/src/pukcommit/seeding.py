"""Counter-based random substreams.

A substream is identified by a root seed plus a tuple of integer counters
(e.g. replicate index, key index). Adding replicates never reshuffles the
streams of earlier ones.
"""
import numpy as np


def substream(seed: int, *counters: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(counters)))


def child_streams(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Independent child generators of ``rng``, ordered by index."""
    return rng.spawn(count)
