"""Ordered parallel map over blocking work: a semaphore bounds how many
asyncio.to_thread calls run at once, gather keeps results in input order.

The numerical kernels spend their time in FFTs that release the GIL, so
threads give real parallelism. Results never depend on the worker count.
"""

import asyncio
import logging
from collections.abc import Callable, Sequence
from typing import TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


async def map_ordered(
    func: Callable[[T], R], items: Sequence[T], workers: int = 1
) -> list[R]:
    """[func(item) for item in items], at most `workers` at a time.

    A failing item is logged and the first failure is re-raised once every
    in-flight call has settled.
    """
    semaphore = asyncio.Semaphore(max(1, workers))

    async def _run_one(index: int, item: T) -> R:
        async with semaphore:
            try:
                return await asyncio.to_thread(func, item)
            except Exception:
                logger.exception("Work item %d failed", index)
                raise

    results = await asyncio.gather(
        *[_run_one(i, item) for i, item in enumerate(items)],
        return_exceptions=True,
    )
    for result in results:
        if isinstance(result, BaseException):
            raise result
    return results  # type: ignore[return-value]
