import logging
import sys
from contextlib import contextmanager
from time import perf_counter
from typing import Iterator

from ..enums import LogLevel
from ..interfaces import ILogger

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class StructuredLogger(ILogger):
    """Stdout logger shared by every service of one run."""

    def __init__(self, name: str = "ccdlab", level: LogLevel = LogLevel.INFO):
        self._level = level
        self._log = logging.getLogger(name)
        self._log.setLevel(logging.getLevelName(level.name))
        # Re-wiring the same name (tests, repeated bootstraps) must not stack handlers.
        if not self._log.handlers:
            self._log.addHandler(self._stdout_handler())

    @staticmethod
    def _stdout_handler() -> logging.Handler:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        return handler

    @property
    def level(self) -> LogLevel:
        return self._level

    def debug(self, message: str) -> None:
        self._log.debug(message)

    def info(self, message: str) -> None:
        self._log.info(message)

    def warning(self, message: str) -> None:
        self._log.warning(message)

    def error(self, message: str) -> None:
        self._log.error(message)


@contextmanager
def timed(logger: ILogger, what: str) -> Iterator[None]:
    """Log ``[timing] <what> took <s>s`` at debug level around a block."""
    start = perf_counter()
    try:
        yield
    finally:
        logger.debug(f"[timing] {what} took {perf_counter() - start:.3f}s")
