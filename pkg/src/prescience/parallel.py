"""Order-preserving job map used by cross-validation and the simulation harness."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def ordered_map(fn, jobs, threads: int = 1):
    """``[fn(j) for j in jobs]``, optionally spread over worker processes.

    Results come back in job order, so aggregates do not depend on scheduling.
    """
    jobs = list(jobs)
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))
