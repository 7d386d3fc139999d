"""Bounded-parallel helper for provider-heavy stages.

Results keep input order, so pipelines stay deterministic as long as the
mapped function is pure.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

DEFAULT_MAX_WORKERS = 4

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(
    fn: Callable[[T], R], items: Iterable[T], max_workers: int = DEFAULT_MAX_WORKERS
) -> list[R]:
    items = list(items)
    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(fn, items))
