from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple, TypeVar

from config import settings

T = TypeVar("T")

DEFAULT_STRIP_ROWS = 64


def defaultWorkers() -> int:
    return max(1, settings.WORKERS)


def stripRanges(height: int, rows: int = DEFAULT_STRIP_ROWS) -> List[Tuple[int, int]]:
    if rows < 1:
        raise ValueError(f"strip height must be >= 1, got {rows}")
    return [(r, min(r + rows, height)) for r in range(0, height, rows)]


def mapStrips(fn: Callable[[int, int], T], height: int, workers: Optional[int] = None,
              rows: int = DEFAULT_STRIP_ROWS) -> List[T]:
    """
    Apply fn(row0, row1) to every row strip of a raster, in parallel.
    Results come back in strip order whatever the completion order, so any
    merge done over them by the caller stays deterministic.
    """
    ranges = stripRanges(height, rows)
    workers = workers or defaultWorkers()
    if workers == 1 or len(ranges) == 1:
        return [fn(r0, r1) for r0, r1 in ranges]

    with ThreadPoolExecutor(max_workers = min(workers, len(ranges))) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))
