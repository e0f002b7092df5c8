"""
Thread pool used by the numerical kernels.
Results always come back in submission order so reductions stay reproducible.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .config import get_thread_count

T = TypeVar('T')
R = TypeVar('R')


class WorkerPool:
    """Ordered map over a bounded thread pool."""

    def __init__(self, threads: Optional[int] = None):
        self.threads = threads if threads is not None else get_thread_count()
        self.executor = None

    def __enter__(self):
        """Context manager entry."""
        if self.threads > 1:
            self.executor = ThreadPoolExecutor(max_workers=self.threads)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        """Context manager exit."""
        if self.executor:
            self.executor.shutdown(wait=True)
            self.executor = None

    def map_ordered(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply func to every item; the i-th result belongs to the i-th item."""
        items = list(items)
        if self.executor is None or len(items) < 2:
            return [func(item) for item in items]
        return list(self.executor.map(func, items))


def ordered_sum(values: Iterable[float]) -> float:
    """Correctly rounded sum, independent of how the values were produced."""
    return math.fsum(values)
