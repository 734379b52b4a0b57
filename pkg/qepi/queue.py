"""Ordered trial dispatch, inline or on a process pool."""

from __future__ import annotations

import logging
import uuid
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Iterator, TypeVar

from qepi import logging_conf

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def _init_worker(level: int) -> None:
    logging_conf.configure_logging(level)


def run_ordered(
    fn: Callable[[T], R],
    tasks: Iterable[T],
    *,
    workers: int = 1,
    log_level: int = logging.INFO,
) -> Iterator[R]:
    """Yield ``fn(task)`` for every task, in task order regardless of completion order.

    ``fn`` and the tasks must be picklable when ``workers`` > 1.
    """

    tasks = list(tasks)
    batch_id = uuid.uuid4().hex[:8]
    logger.info("batch %s: %d task(s) on %d worker(s)", batch_id, len(tasks), workers)
    if workers <= 1:
        for task in tasks:
            yield fn(task)
        return
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(log_level,)
    ) as pool:
        try:
            yield from pool.map(fn, tasks, chunksize=1)
        except BaseException:
            pool.shutdown(wait=False, cancel_futures=True)
            raise
