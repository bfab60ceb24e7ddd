"""
Counter-based random streams: block b of a run keyed by seed always draws the
same numbers, whichever thread evaluates it.
"""

from __future__ import annotations

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

BLOCK_SIZE = 4096

T = TypeVar("T")


def stream(seed: int, block: int) -> np.random.Generator:
    counter = np.array([0, 0, 0, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def blocks(samples: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    """
    (block index, sample count) pairs covering samples.
    """
    out = []
    start, index = 0, 0
    while start < samples:
        count = min(block_size, samples - start)
        out.append((index, count))
        start += count
        index += 1
    return out


def run_blocks(fn: Callable[[int, int], T], samples: int, threads: int = 1, block_size: int = BLOCK_SIZE) -> list[T]:
    """
    Evaluate fn(block, count) for every block; results come back in block order.
    """
    plan = blocks(samples, block_size)
    if threads <= 1 or len(plan) <= 1:
        return [fn(index, count) for index, count in plan]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda item: fn(*item), plan))


def unit_vectors(rng: np.random.Generator, count: int) -> np.ndarray:
    v = rng.standard_normal((count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
