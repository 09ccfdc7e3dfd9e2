import logging
from multiprocessing import Pool
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class EvaluationPool:
    """Order-preserving map over worker processes.

    With ``workers <= 1`` everything runs in the calling process, which keeps tests and
    debugging simple. ``fn`` must be a module-level function so it can be pickled.
    """

    def __init__(self, workers: int = 1):
        self.workers = max(1, int(workers))
        self._pool: Optional[Pool] = None

    def _ensure_pool(self) -> Optional[Pool]:
        if self.workers > 1 and self._pool is None:
            logger.debug("starting %d evaluation workers", self.workers)
            self._pool = Pool(self.workers)
        return self._pool

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        items = list(items)
        pool = self._ensure_pool()
        if pool is None or len(items) < 2:
            return [fn(item) for item in items]
        chunk = max(1, len(items) // (self.workers * 4))
        return pool.map(fn, items, chunksize=chunk)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def __enter__(self) -> "EvaluationPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


SERIAL = EvaluationPool(1)
