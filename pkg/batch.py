"""
Bounded concurrent execution of independent jobs.

Threads for fine-grained batches (energies, phases); one terminable process
per job where a wall-clock budget has to hold.
"""

import asyncio
import logging
import math
import multiprocessing
import sys
import traceback
from typing import Any, Callable, List, Optional, Sequence, TypeVar, Union

from config import LOG_FILE, LOG_FORMAT, WORKER_COUNT
from errors import HarperError, WorkerError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


async def gather_bounded_async(
    func: Callable[[T], R], items: Sequence[T], max_concurrent: Optional[int] = None
) -> List[Union[R, BaseException]]:
    """
    Run func over items in worker threads, at most max_concurrent at a time.

    Results come back in input order; an item whose job raised yields the
    exception instance instead of a result.
    """
    semaphore = asyncio.Semaphore(max_concurrent or WORKER_COUNT)

    async def run_with_limit(item):
        async with semaphore:
            return await asyncio.to_thread(func, item)

    tasks = [run_with_limit(item) for item in items]
    return await asyncio.gather(*tasks, return_exceptions=True)


def gather_bounded(
    func: Callable[[T], R], items: Sequence[T], max_concurrent: Optional[int] = None
) -> List[Union[R, BaseException]]:
    """Synchronous wrapper around gather_bounded_async."""
    workers = max_concurrent or WORKER_COUNT
    if workers == 1 or len(items) <= 1:
        results: List[Union[R, BaseException]] = []
        for item in items:
            try:
                results.append(func(item))
            except Exception as e:
                results.append(e)
        return results
    return asyncio.run(gather_bounded_async(func, items, workers))


def raise_first(results: Sequence[Union[R, BaseException]]) -> List[R]:
    """Return results unchanged, re-raising the first exception among them."""
    for result in results:
        if isinstance(result, BaseException):
            raise result
    return list(results)


# ===========================
# Process jobs
# ===========================

def _process_entry(conn, func: Callable[..., Any], args: tuple, log_level: int):
    """Child side: log like the parent, run the job, send back ("ok", result) or ("error", ...)."""
    root = logging.getLogger()
    root.setLevel(log_level)
    handlers = [logging.StreamHandler(sys.stderr)]
    if LOG_FILE:
        handlers.append(logging.FileHandler(LOG_FILE))
    for handler in handlers:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
    try:
        conn.send(("ok", func(*args)))
    except Exception as e:
        conn.send(("error", type(e).__name__, str(e), isinstance(e, HarperError), traceback.format_exc()))
    finally:
        conn.close()


async def run_in_process_async(func: Callable[..., R], args: tuple, timeout: Optional[float] = None) -> R:
    """
    Run func(*args) in a fresh process and return its result.

    Past `timeout` seconds the process is terminated and asyncio.TimeoutError
    raised. An exception inside the job comes back as WorkerError. func, args
    and the result must be picklable.
    """
    context = multiprocessing.get_context("spawn")
    receiver, sender = context.Pipe(duplex=False)
    process = context.Process(
        target=_process_entry, args=(sender, func, args, logging.getLogger().getEffectiveLevel()), daemon=True
    )
    process.start()
    sender.close()
    wait = None if timeout is None or math.isinf(timeout) else timeout
    try:
        if not await asyncio.to_thread(receiver.poll, wait):
            raise asyncio.TimeoutError(f"job exceeded {timeout:g}s")
        try:
            message = receiver.recv()
        except EOFError:
            raise WorkerError("ProcessExit", f"worker exited with code {process.exitcode} before replying", False)
    finally:
        if process.is_alive():
            process.terminate()
        await asyncio.to_thread(process.join)
        receiver.close()

    if message[0] == "ok":
        return message[1]
    _, type_name, text, domain, remote_traceback = message
    raise WorkerError(type_name, text, domain, remote_traceback)
