from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Mapping

import numpy as np


class ILogger(ABC):
    @abstractmethod
    def debug(self, message: str) -> None: ...

    @abstractmethod
    def info(self, message: str) -> None: ...

    @abstractmethod
    def warning(self, message: str) -> None: ...

    @abstractmethod
    def error(self, message: str) -> None: ...


class IGenerator(ABC):
    """Traceless 2×2 Hermitian generator H(t) = h(t)·σ in rad/s."""

    @abstractmethod
    def pauli_components(self, times: np.ndarray) -> np.ndarray:
        """Return h(t) with shape ``times.shape + (3,)`` (or ``(n, batch, 3)``)."""
        ...

    @abstractmethod
    def max_frequency(self) -> float:
        """Largest angular frequency (rad/s) the integrator step must resolve."""
        ...


class ISpectralFunction(ABC):
    """Two-sided noise PSD S(ν) in the angular-frequency convention."""

    @abstractmethod
    def __call__(self, nu: Any) -> Any: ...

    @abstractmethod
    def inverse_correlation_times(self) -> List[float]:
        """1/τc of every Lorentzian member (empty for white/static spectra)."""
        ...

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]: ...


class INoiseSource(ABC):
    """Classical stochastic process realized as a piecewise-constant series."""

    @property
    @abstractmethod
    def kind(self) -> Any: ...

    @abstractmethod
    def magnitude(self) -> float:
        """Typical size of one sample (its standard deviation where defined)."""
        ...

    @abstractmethod
    def realize(self, rng: np.random.Generator, dt: float, n: int) -> np.ndarray: ...


class IResultWriter(ABC):
    @abstractmethod
    def write_table(self, name: str, columns: Mapping[str, np.ndarray]) -> Path: ...

    @abstractmethod
    def write_json(self, name: str, payload: Mapping[str, Any]) -> Path: ...

    @abstractmethod
    def write_text(self, filename: str, text: str) -> Path: ...

    @property
    @abstractmethod
    def written(self) -> List[Path]: ...


class IToolkitController(ABC):
    @abstractmethod
    def run(self, command: Any, config: Any, writer: IResultWriter) -> List[Path]: ...
