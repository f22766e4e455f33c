from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Sequence, TypeVar

from rich.progress import Progress

from ..errors import InvalidConfigError

T = TypeVar("T")
R = TypeVar("R")


class ParallelMapper:
    """Ordered map over independent work items on a thread pool.

    Results come back in input order whatever the completion order, so the
    thread count never changes an output.
    """

    def __init__(self, threads: int = 1, show_progress: bool = False):
        if threads < 1:
            raise InvalidConfigError(f"'threads' must be >= 1, got {threads}")
        self._threads = int(threads)
        self._show_progress = show_progress

    @property
    def threads(self) -> int:
        return self._threads

    def map(self, fn: Callable[[T], R], items: Sequence[T], description: str = "working") -> List[R]:
        items = list(items)
        results: List[R] = [None] * len(items)  # type: ignore[list-item]
        with Progress(transient=True, disable=not self._show_progress) as progress:
            task = progress.add_task(description, total=len(items))
            if self._threads == 1 or len(items) <= 1:
                for i, item in enumerate(items):
                    results[i] = fn(item)
                    progress.advance(task)
                return results
            with ThreadPoolExecutor(max_workers=self._threads) as pool:
                futures = {pool.submit(fn, item): i for i, item in enumerate(items)}
                for future in as_completed(futures):
                    results[futures[future]] = future.result()
                    progress.advance(task)
        return results
