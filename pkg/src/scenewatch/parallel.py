"""Thread fan-out used by the data-parallel stages.

Work items are independent and each writes a disjoint slice of its
output, so results never depend on the worker count.  The numba kernels
release the GIL, which is what makes threads worthwhile here.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def row_bands(height: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, height))
    step, extra = divmod(height, parts)
    bands, r0 = [], 0
    for i in range(parts):
        r1 = r0 + step + (1 if i < extra else 0)
        bands.append((r0, r1))
        r0 = r1
    return bands


class Workers:
    """A thread pool that degrades to inline calls for ``threads == 1``."""

    def __init__(self, threads: int = 1):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.threads = threads
        self._pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def map(self, fn, items):
        items = list(items)
        if self._pool is None or len(items) <= 1:
            return [fn(it) for it in items]
        return list(self._pool.map(fn, items))

    def submit(self, fn, *args):
        if self._pool is None:
            return _Done(fn(*args))
        return self._pool.submit(fn, *args)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class _Done:
    def __init__(self, value):
        self._value = value

    def result(self):
        return self._value
