"""Seeding and deterministic parallel maps.

Every task ``i`` of an experiment draws from its own stream
``SeedSequence(seed, spawn_key=(tag, i))``. Streams depend only on the master seed,
the experiment tag and the task index, so results are identical for any number of
worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

TAGS = {"points": 1, "trials": 2, "replicates": 3, "pilot": 4}


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def task_stream(seed: int, tag: str, i: int) -> np.random.Generator:
    return substream(seed, TAGS[tag], i)


def chunk_ranges(n: int, chunk: int):
    return [(s, min(n, s + chunk)) for s in range(0, n, chunk)]


def ordered_map(fn, items, threads: int = 1):
    """``[fn(x) for x in items]`` evaluated on up to ``threads`` workers, in input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))
