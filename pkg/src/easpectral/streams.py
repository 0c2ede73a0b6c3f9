"""Counter-keyed random streams and an order-preserving worker pool.

Every random draw in an experiment comes from a stream addressed by a tuple
of integers (replica, t-index, ...) under one master seed, so any single
sample can be regenerated in isolation and results never depend on how work
is scheduled across threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

SeedLike = int | np.random.SeedSequence | np.random.Generator | None


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    """Normalise ints, seed sequences and generators to a ``SeedSequence``.

    A ``Generator`` is consumed for one 63-bit draw to derive the master key.
    """
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(0, 2**63 - 1)))
    return np.random.SeedSequence(seed)


def stream(root: np.random.SeedSequence, *key: int) -> np.random.Generator:
    """Generator for the sub-stream ``key`` of ``root``."""
    ss = np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def default_threads() -> int:
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """``[fn(x) for x in items]`` on a thread pool, results in input order."""
    items = list(items)
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def chunks(n: int, size: int) -> Sequence[range]:
    return [range(i, min(n, i + size)) for i in range(0, n, size)]
