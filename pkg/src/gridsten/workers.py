"""Thread pool that runs GIL-free kernels over disjoint work ranges."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence


class WorkerPool:
    """Fixed-size pool; ``num_workers == 1`` runs everything inline.

    Kernels handed to :meth:`run` must release the GIL (numba ``nogil=True``)
    for the threads to overlap.
    """

    def __init__(self, num_workers: int = 1):
        if num_workers < 1:
            raise ValueError(f"num_workers must be >= 1, got {num_workers}")
        self.num_workers = int(num_workers)
        self._executor = (
            ThreadPoolExecutor(max_workers=self.num_workers, thread_name_prefix="gridsten")
            if self.num_workers > 1
            else None
        )
        self.closed = False

    def run(self, fn: Callable[[int, int], object], ranges: Sequence[tuple[int, int]]) -> list:
        """Call ``fn(begin, end)`` once per range and return results in order."""
        if self.closed:
            raise RuntimeError("worker pool has been shut down")
        if self._executor is None or len(ranges) == 1:
            return [fn(a, b) for a, b in ranges]
        futures = [self._executor.submit(fn, a, b) for a, b in ranges]
        return [f.result() for f in futures]

    def shutdown(self) -> None:
        if self._executor is not None and not self.closed:
            self._executor.shutdown(wait=True)
        self.closed = True

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


def nonempty(ranges: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    return [(a, b) for a, b in ranges if b > a]
