"""Thread-count policy and an order-preserving parallel map.

The ``ELAX_THREADS`` environment variable caps every form of parallelism
(FFT workers and :func:`parallel_map`).  Unset means a single thread.
"""

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigurationError


def thread_count():
    raw = os.environ.get("ELAX_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"ELAX_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigurationError(f"ELAX_THREADS must be a positive integer, got {raw!r}")
    return value


def parallel_map(fn, items, threads=None):
    """Apply ``fn`` to each item, returning results in input order."""
    items = list(items)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
