import asyncio
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

from psqueue.errors import ParameterError

logger = logging.getLogger(__name__)

J = TypeVar("J")
T = TypeVar("T")


async def _gather(fn: Callable[[J], T], jobs: Sequence[J], workers: int) -> list[T]:
    """Submit every job to a process pool from the running loop and await them in submission order."""
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [loop.run_in_executor(pool, fn, job) for job in jobs]
        return list(await asyncio.gather(*futures))


def run_blocks(fn: Callable[[J], T], jobs: Sequence[J], workers: int = 1) -> list[T]:
    """
    Apply a picklable module-level function to each job, in this process or across `workers` processes.

    Results come back in job order whatever the worker count.

    >>> run_blocks(abs, [-1, 2, -3])
    [1, 2, 3]
    """
    if workers < 1:
        raise ParameterError(f"workers must be at least 1, got {workers}")
    if workers == 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    logger.debug("dispatching %d blocks to %d worker processes", len(jobs), workers)
    return asyncio.run(_gather(fn, jobs, min(workers, len(jobs))))
