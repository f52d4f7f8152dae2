"""Row-blocked thread parallelism; results never depend on the worker count."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

_threads = 1


def set_threads(n):
    global _threads
    if int(n) < 1:
        raise ValueError("thread count must be positive")
    _threads = int(n)


def get_threads():
    return _threads


def map_rows(fn, n, block, threads=None):
    """Concatenate fn(slice) over consecutive row blocks of range(n).

    Each block is computed independently, so the output is bitwise the same
    for every thread count.
    """
    threads = threads or _threads
    slices = [slice(a, min(a + block, n)) for a in range(0, n, max(block, 1))]
    if not slices:
        return fn(slice(0, 0))
    if threads == 1 or len(slices) == 1:
        parts = [fn(s) for s in slices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, slices))
    return np.concatenate(parts, axis=0)
