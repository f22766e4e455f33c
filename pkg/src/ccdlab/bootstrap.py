"""Dependency wiring for the command-line tool.

Builds the logger, the thread pool mapper, the rate calculator and the
controller from arguments with environment fallbacks, so the CLI and the
tests construct the stack the same way.
"""
import os
from typing import Optional

from ..__version__ import version
from .controller import ToolkitController
from .enums import EnvVar, LogLevel
from .errors import InvalidConfigError
from .interfaces import ILogger
from .services.gbe import RelaxationRateCalculator
from .services.logging import StructuredLogger
from .services.parallel import ParallelMapper


class ToolkitBootstrap:
    """Wires the toolkit's services and controller.

    Use ToolkitBootstrap.from_env() to construct a fully-initialized
    instance, then read the `controller` and `logger` properties.
    """

    def __init__(self, controller: ToolkitController, mapper: ParallelMapper, logger: ILogger):
        self._controller = controller
        self._mapper = mapper
        self._logger = logger

    @property
    def controller(self) -> ToolkitController:
        return self._controller

    @property
    def mapper(self) -> ParallelMapper:
        return self._mapper

    @property
    def logger(self) -> ILogger:
        return self._logger

    @staticmethod
    def _env(name: str, default: str) -> str:
        """Read an env var, stripped; treat empty/whitespace-only as unset."""
        value = os.getenv(name)
        if value is None or not value.strip():
            return default
        return value.strip()

    @classmethod
    def _threads(cls, threads: Optional[int]) -> int:
        if threads is not None:
            return threads
        raw = cls._env(EnvVar.CCDLAB_THREADS.value, str(os.cpu_count() or 1))
        try:
            return int(raw)
        except ValueError:
            raise InvalidConfigError(f"{EnvVar.CCDLAB_THREADS.value} must be an integer, got {raw!r}") from None

    @classmethod
    def _log_level(cls, log_level: Optional[LogLevel]) -> LogLevel:
        if log_level is not None:
            return log_level
        raw = cls._env(EnvVar.CCDLAB_LOG_LEVEL.value, LogLevel.INFO.value).lower()
        try:
            return LogLevel(raw)
        except ValueError:
            allowed = ", ".join(level.value for level in LogLevel)
            raise InvalidConfigError(
                f"{EnvVar.CCDLAB_LOG_LEVEL.value} must be one of {allowed}, got {raw!r}"
            ) from None

    @classmethod
    def from_env(
        cls,
        threads: Optional[int] = None,
        log_level: Optional[LogLevel] = None,
        show_progress: bool = False,
    ) -> "ToolkitBootstrap":
        """Construct the toolkit stack; explicit arguments win over the environment."""
        logger = StructuredLogger("ccdlab", cls._log_level(log_level))
        mapper = ParallelMapper(cls._threads(threads), show_progress=show_progress)
        logger.debug(f"Using {mapper.threads} worker thread(s)")
        controller = ToolkitController(
            rates=RelaxationRateCalculator(logger), mapper=mapper, logger=logger, version=version,
        )
        return cls(controller=controller, mapper=mapper, logger=logger)
