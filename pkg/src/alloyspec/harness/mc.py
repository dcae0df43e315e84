"""Seeded parallel Monte Carlo with a trial-index-ordered reduction.

Workers are pure functions of the trial index (each derives its own RNG
from the master seed), so the result list is a pure function of
(config, seed) no matter how many threads execute it.  BLAS pools are
pinned to one thread for the whole section — multi-threaded BLAS can
reorder floating-point reductions, which would break byte-stable
artifacts across thread budgets.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, TypeVar

from threadpoolctl import threadpool_limits

T = TypeVar("T")


def run_trials(trials: int, worker: Callable[[int], T], threads: int = 1) -> List[T]:
    """Evaluate ``worker(0..trials-1)``; results ordered by trial index."""
    if trials < 0:
        raise ValueError(f"trials must be >= 0, got {trials}")
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    with threadpool_limits(limits=1):
        if threads == 1 or trials <= 1:
            return [worker(t) for t in range(trials)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # Executor.map preserves input order regardless of completion order.
            return list(pool.map(worker, range(trials)))


def trial_mapper(threads: int) -> Callable[[Callable[[int], T], Iterable[int]], Sequence[T]]:
    """An order-preserving ``map`` replacement running on ``threads`` threads."""

    def mapper(fn: Callable[[int], T], indices: Iterable[int]) -> Sequence[T]:
        idx = list(indices)
        if threads == 1 or len(idx) <= 1:
            with threadpool_limits(limits=1):
                return [fn(i) for i in idx]
        with threadpool_limits(limits=1):
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(fn, idx))

    return mapper
