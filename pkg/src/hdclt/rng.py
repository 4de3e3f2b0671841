"""Counter-based random streams and deterministic block-parallel execution.

Every stochastic routine draws from Philox generators keyed by
``(seed, experiment, block, ...)``.  Work is cut into blocks of a fixed
number of replicates that does not depend on the worker count, and block
results are reassembled in block order, so output is bit-identical for any
``workers`` value.
"""
from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

BLOCK = 8192


def experiment_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, experiment: str, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, experiment, *keys)``."""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(experiment_key(experiment), *map(int, keys)))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(total: int, block: int = BLOCK) -> list[int]:
    full, rest = divmod(int(total), block)
    return [block] * full + ([rest] if rest else [])


def default_workers() -> int:
    return int(os.environ.get("HDCLT_WORKERS", "1"))


def map_blocks(
    fn: Callable[[np.random.Generator, int], T],
    total: int,
    seed: int,
    experiment: str,
    workers: int | None = None,
    block: int = BLOCK,
    keys: Sequence[int] = (),
) -> list[T]:
    """Run ``fn(rng_b, size_b)`` over the fixed block partition of ``total``.

    Results come back in block order regardless of ``workers``.
    """
    sizes = block_sizes(total, block)
    tasks = [(stream(seed, experiment, *keys, b), s) for b, s in enumerate(sizes)]
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(g, s) for g, s in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: fn(*t), tasks))


def concat_blocks(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    total: int,
    seed: int,
    experiment: str,
    workers: int | None = None,
    block: int = BLOCK,
    keys: Sequence[int] = (),
) -> np.ndarray:
    parts = map_blocks(fn, total, seed, experiment, workers=workers, block=block, keys=keys)
    return np.concatenate(parts, axis=0)
