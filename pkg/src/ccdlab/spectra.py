"""Noise power spectral densities.

Two-sided, angular-frequency convention: the autocorrelation of ξ is
(1/2π)∫S(ν)e^{-iντ}dν. All spectra are even in ν and are evaluated at |ν|.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Tuple

import numpy as np

from .enums import SpectrumKind
from .errors import InvalidConfigError, UnsupportedSpectrumError
from .interfaces import ISpectralFunction


def _finite_nonnegative(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise InvalidConfigError(f"'{name}' must be finite and >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class White(ISpectralFunction):
    level: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "level", _finite_nonnegative("level", self.level))

    def __call__(self, nu: Any) -> Any:
        nu = np.asarray(nu, dtype=float)
        value = np.full(nu.shape, self.level)
        return value if value.ndim else float(value)

    def inverse_correlation_times(self) -> List[float]:
        return []

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": SpectrumKind.WHITE.value, "level": self.level}


ZERO = White(0.0)


@dataclass(frozen=True)
class Lorentzian(ISpectralFunction):
    """S(ν) = 2·variance·τc / (1 + ν²τc²), the PSD of an OU process."""

    variance: float
    tau_c: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "variance", _finite_nonnegative("variance", self.variance))
        tau_c = float(self.tau_c)
        if not math.isfinite(tau_c) or tau_c <= 0:
            raise InvalidConfigError(f"'tau_c' must be finite and > 0, got {tau_c!r}")
        object.__setattr__(self, "tau_c", tau_c)

    @classmethod
    def from_sigma(cls, sigma: float, tau_c: float) -> "Lorentzian":
        return cls(variance=sigma * sigma, tau_c=tau_c)

    def __call__(self, nu: Any) -> Any:
        nu = np.asarray(nu, dtype=float)
        value = 2.0 * self.variance * self.tau_c / (1.0 + (nu * self.tau_c) ** 2)
        return value if value.ndim else float(value)

    def inverse_correlation_times(self) -> List[float]:
        return [1.0 / self.tau_c] if self.variance > 0 else []

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": SpectrumKind.LORENTZIAN.value, "variance": self.variance, "tau_c": self.tau_c}


@dataclass(frozen=True)
class StaticGaussian(ISpectralFunction):
    """Quasi-static spread of standard deviation ``sigma`` (rad/s).

    Its spectrum is a delta at ν = 0: zero everywhere else, undefined at 0.
    Static decay is computed by the ensemble and stochastic modules only.
    """

    sigma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma", _finite_nonnegative("sigma", self.sigma))

    def __call__(self, nu: Any) -> Any:
        nu = np.asarray(nu, dtype=float)
        if self.sigma > 0 and np.any(nu == 0.0):
            raise UnsupportedSpectrumError(
                "static Gaussian spectrum is a delta at zero frequency; use the ensemble module"
            )
        value = np.zeros(nu.shape)
        return value if value.ndim else float(value)

    def inverse_correlation_times(self) -> List[float]:
        return []

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": SpectrumKind.STATIC_GAUSSIAN.value, "sigma": self.sigma}


@dataclass(frozen=True)
class SpectrumSum(ISpectralFunction):
    terms: Tuple[ISpectralFunction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))

    def __call__(self, nu: Any) -> Any:
        nu = np.asarray(nu, dtype=float)
        value = np.zeros(nu.shape)
        for term in self.terms:
            value = value + term(nu)
        return value if value.ndim else float(value)

    def inverse_correlation_times(self) -> List[float]:
        return [rate for term in self.terms for rate in term.inverse_correlation_times()]

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": SpectrumKind.SUM.value, "terms": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True)
class TransformedSpectrum(ISpectralFunction):
    """Σ weight · base(ν + shift): a lab PSD seen from a rotating frame."""

    terms: Tuple[Tuple[float, float, ISpectralFunction], ...]

    def __post_init__(self) -> None:
        terms = tuple((float(w), float(s), base) for w, s, base in self.terms)
        if any(w < 0 for w, _, _ in terms):
            raise InvalidConfigError("transformed spectrum weights must be >= 0")
        object.__setattr__(self, "terms", terms)

    def __call__(self, nu: Any) -> Any:
        nu = np.asarray(nu, dtype=float)
        value = np.zeros(nu.shape)
        for weight, shift, base in self.terms:
            if weight:
                value = value + weight * np.asarray(base(np.abs(nu + shift)))
        return value if value.ndim else float(value)

    def inverse_correlation_times(self) -> List[float]:
        return [rate for w, _, base in self.terms if w for rate in base.inverse_correlation_times()]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": SpectrumKind.TRANSFORMED.value,
            "terms": [{"weight": w, "shift": s, "base": b.to_dict()} for w, s, b in self.terms],
        }


class SpectrumFactory:
    """Builds spectral functions from plain mappings (rad/s, s units)."""

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ISpectralFunction:
        try:
            kind = SpectrumKind(data["kind"])
        except (KeyError, ValueError) as e:
            raise InvalidConfigError(f"unknown spectrum kind in {dict(data)!r}") from e
        if kind is SpectrumKind.WHITE:
            return White(data["level"])
        if kind is SpectrumKind.LORENTZIAN:
            return Lorentzian(data["variance"], data["tau_c"])
        if kind is SpectrumKind.STATIC_GAUSSIAN:
            return StaticGaussian(data["sigma"])
        if kind is SpectrumKind.SUM:
            return SpectrumSum(tuple(cls.from_dict(t) for t in data["terms"]))
        return TransformedSpectrum(tuple(
            (t["weight"], t["shift"], cls.from_dict(t["base"])) for t in data["terms"]
        ))

    @staticmethod
    def scaled(spectrum: ISpectralFunction, factor: float) -> ISpectralFunction:
        return TransformedSpectrum(((factor, 0.0, spectrum),))


@dataclass(frozen=True)
class NoisePSDSet:
    """Lab-frame PSDs of ξ_x, ξ_z, ξ_Ω and ξ_εm."""

    S_x: ISpectralFunction = field(default=ZERO)
    S_z: ISpectralFunction = field(default=ZERO)
    S_Omega: ISpectralFunction = field(default=ZERO)
    S_em: ISpectralFunction = field(default=ZERO)

    def members(self) -> Dict[str, ISpectralFunction]:
        return {"S_x": self.S_x, "S_z": self.S_z, "S_Omega": self.S_Omega, "S_em": self.S_em}

    def inverse_correlation_times(self) -> List[float]:
        return [rate for member in self.members().values() for rate in member.inverse_correlation_times()]

    def with_relative_modulation_noise(self, eps_m: float, Omega: float) -> "NoisePSDSet":
        """Scale S_εm by (ε_m/Ω)²: modulation noise inherited from the drive source."""
        if Omega <= 0:
            raise InvalidConfigError(f"'Omega' must be > 0, got {Omega}")
        ratio = eps_m / Omega
        return NoisePSDSet(
            S_x=self.S_x, S_z=self.S_z, S_Omega=self.S_Omega,
            S_em=SpectrumFactory.scaled(self.S_em, ratio * ratio),
        )

    def without_modulation_noise(self) -> "NoisePSDSet":
        return NoisePSDSet(S_x=self.S_x, S_z=self.S_z, S_Omega=self.S_Omega)

    def to_dict(self) -> Dict[str, Any]:
        return {name: member.to_dict() for name, member in self.members().items()}
