"""Order-preserving work distribution for independent replicates.

Replicates are indexed 0..n-1 and each derives its own RNG stream from its
index, so the collected results are identical for any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")


def parallel_map(fn: Callable[[int], T], n_items: int, threads: int = 1) -> list[T]:
    """Apply ``fn`` to 0..n_items-1, optionally across threads, keeping order."""
    if n_items < 0:
        raise ValueError(f"n_items must be non-negative, got {n_items}")
    if threads <= 1 or n_items <= 1:
        return [fn(i) for i in range(n_items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_items)))
