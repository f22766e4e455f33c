"""Typed results of the toolkit.

Frozen dataclasses whose wire forms (``to_dict``) are keyed by ResultKey, so
the CLI writers and the tests agree on names without magic strings.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from .drive import TWO_PI, QubitState, bloch_components
from .enums import BandFamily, ContrastMode, FitModelKind, Frame, RateVariant, ResultKey, Scenario
from .errors import InvalidConfigError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_points`` from ``t_start`` to ``t_end`` inclusive (s)."""

    t_start: float
    t_end: float
    n_points: int

    def __post_init__(self) -> None:
        if isinstance(self.n_points, bool) or int(self.n_points) != self.n_points or self.n_points < 2:
            raise InvalidConfigError(f"'n_points' must be an integer >= 2, got {self.n_points!r}")
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise InvalidConfigError("time grid bounds must be finite")
        if not self.t_end > self.t_start:
            raise InvalidConfigError(f"'t_end' must exceed 't_start', got [{self.t_start}, {self.t_end}]")
        object.__setattr__(self, "n_points", int(self.n_points))

    @classmethod
    def span(cls, t_end: float, n_points: int) -> "TimeGrid":
        return cls(0.0, t_end, n_points)

    @classmethod
    def periods(cls, period: float, n_periods: int, points_per_period: int) -> "TimeGrid":
        return cls(0.0, n_periods * period, n_periods * points_per_period + 1)

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_points)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States (n_points, 2) sampled on ``grid`` in ``frame``."""

    grid: TimeGrid
    states: np.ndarray
    frame: Frame

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=complex)
        if states.shape != (self.grid.n_points, 2):
            raise InvalidConfigError(
                f"states must have shape ({self.grid.n_points}, 2), got {states.shape}"
            )
        object.__setattr__(self, "states", states)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self) -> int:
        return self.grid.n_points

    def state(self, index: int) -> QubitState:
        return QubitState.from_vector(self.states[index])

    def bloch(self) -> np.ndarray:
        return bloch_components(self.states)


@dataclass(frozen=True, eq=False)
class FloquetData:
    """Floquet decomposition of a periodic first-frame Hamiltonian.

    ``modes[a, k]`` is Φ_a(t_k) at ``sample_times[k]`` over one period, with
    a = 0 for the "+" mode and a = 1 for the "-" mode.
    """

    period: float
    omega_m: float
    monodromy: np.ndarray
    lambda_plus: float
    lambda_minus: float
    gap: float
    sample_times: np.ndarray
    modes: np.ndarray

    @property
    def initial_modes(self) -> np.ndarray:
        return self.modes[:, 0, :]

    @property
    def quasienergies(self) -> Tuple[float, float]:
        return self.lambda_plus, self.lambda_minus

    def shifted(self, n_plus: int, n_minus: int) -> "FloquetData":
        """Move λ± by n±·ω_m, re-phasing the modes so Ψ(t) is unchanged."""
        phases = np.exp(1j * self.omega_m * np.outer([n_plus, n_minus], self.sample_times))
        return FloquetData(
            period=self.period,
            omega_m=self.omega_m,
            monodromy=self.monodromy,
            lambda_plus=self.lambda_plus + n_plus * self.omega_m,
            lambda_minus=self.lambda_minus + n_minus * self.omega_m,
            gap=self.gap,
            sample_times=self.sample_times,
            modes=self.modes * phases[:, :, None],
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            ResultKey.LAMBDA_PLUS.value: self.lambda_plus,
            ResultKey.LAMBDA_MINUS.value: self.lambda_minus,
            ResultKey.GAP.value: self.gap,
        }


@dataclass(frozen=True)
class BandComponent:
    family: BandFamily
    index: int
    frequency: float
    amplitude: complex

    def to_dict(self) -> Dict[str, Any]:
        return {
            ResultKey.FAMILY.value: self.family.value,
            ResultKey.INDEX.value: self.index,
            ResultKey.FREQUENCY.value: self.frequency,
            ResultKey.FREQUENCY_MHZ.value: self.frequency / TWO_PI / 1e6,
            ResultKey.AMPLITUDE_RE.value: self.amplitude.real,
            ResultKey.AMPLITUDE_IM.value: self.amplitude.imag,
        }


@dataclass(frozen=True)
class BandSpectrum:
    """Positive-frequency line spectrum of P|0>(t).

    P(t) = A_0 + Σ 2·Re(A_f e^{i f t}); the center component with index 0 is
    the constant A_0 and is counted once.
    """

    components: Tuple[BandComponent, ...]

    def family(self, family: BandFamily) -> List[BandComponent]:
        return [c for c in self.components if c.family is family]

    def weight(self, family: BandFamily) -> float:
        """Σ|A|² over the oscillating members of a family."""
        return float(sum(abs(c.amplitude) ** 2 for c in self.family(family) if c.frequency > 0))

    @property
    def sideband_weight(self) -> float:
        return self.weight(BandFamily.UPPER) + self.weight(BandFamily.LOWER)

    @property
    def center_weight(self) -> float:
        return self.weight(BandFamily.CENTER)

    def center_only(self) -> "BandSpectrum":
        return BandSpectrum(tuple(self.family(BandFamily.CENTER)))

    def frequencies(self) -> np.ndarray:
        return np.array([c.frequency for c in self.components])

    def reconstruct(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        signal = np.zeros(times.shape)
        for c in self.components:
            if c.family is BandFamily.CENTER and c.index == 0:
                signal += c.amplitude.real
            else:
                signal += 2.0 * (c.amplitude * np.exp(1j * c.frequency * times)).real
        return signal

    def to_dict(self) -> Dict[str, Any]:
        return {ResultKey.BANDS.value: [c.to_dict() for c in self.components]}


def _inverse(rate: float) -> float:
    return math.inf if rate == 0 else 1.0 / rate


@dataclass(frozen=True)
class DecayRates:
    """Decay rates along the working-frame axes and the derived relaxation times.

    ``rate_1`` is the longitudinal rate (1/T1ρ or 1/T1ρρ) and ``rate_2`` the
    transverse one, so 1/T2 = 1/(2·T1) + 1/T2' holds by construction.
    """

    gamma_x: float
    gamma_y: float
    gamma_z: float
    rate_1: float
    rate_2: float
    frame: Frame
    scenario: Scenario
    variant: RateVariant = RateVariant.EXACT
    valid: bool = True

    def __post_init__(self) -> None:
        for name in ("gamma_x", "gamma_y", "gamma_z", "rate_1", "rate_2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < -1e-12 * max(1.0, abs(self.rate_2)):
                raise InvalidConfigError(f"'{name}' must be finite and >= 0, got {value!r}")

    @property
    def rate_2_pure(self) -> float:
        return self.rate_2 - 0.5 * self.rate_1

    @property
    def t1(self) -> float:
        return _inverse(self.rate_1)

    @property
    def t2(self) -> float:
        return _inverse(self.rate_2)

    @property
    def t2_pure(self) -> float:
        return _inverse(self.rate_2_pure)

    def to_dict(self) -> Dict[str, Any]:
        return {
            ResultKey.SCENARIO.value: self.scenario.value,
            ResultKey.VARIANT.value: self.variant.value,
            ResultKey.FRAME.value: self.frame.value,
            ResultKey.GAMMA_X.value: self.gamma_x,
            ResultKey.GAMMA_Y.value: self.gamma_y,
            ResultKey.GAMMA_Z.value: self.gamma_z,
            ResultKey.RATE_1.value: self.rate_1,
            ResultKey.RATE_2.value: self.rate_2,
            ResultKey.RATE_2_PURE.value: self.rate_2_pure,
            ResultKey.T1_S.value: self.t1,
            ResultKey.T2_S.value: self.t2,
            ResultKey.T2_PURE_S.value: self.t2_pure,
            ResultKey.VALID.value: self.valid,
        }


@dataclass(frozen=True)
class FitResult:
    """Parameters of a fitted model; time-like parameters in s, frequencies in rad/s."""

    model: FitModelKind
    params: Dict[str, float]
    stderrs: Dict[str, float]
    residual_rms: float
    converged: bool
    n_components: int = 1
    report: str = ""

    @property
    def rate(self) -> float:
        """Decay rate (1/s) of the first (dominant) component."""
        if self.model is FitModelKind.EXPONENTIAL:
            return self.params["rate"]
        if self.model is FitModelKind.WINDOW_COSINE:
            return 0.0
        tau = self.params["tau1"]
        return 0.0 if math.isinf(tau) else 1.0 / tau

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        from .services.analysis import FitModels

        return FitModels.evaluate(self.model, self.params, np.asarray(times, dtype=float), self.n_components)

    def to_dict(self) -> Dict[str, Any]:
        return {
            ResultKey.MODEL.value: self.model.value,
            ResultKey.PARAMS.value: dict(self.params),
            ResultKey.STDERRS.value: dict(self.stderrs),
            ResultKey.RESIDUAL_RMS.value: self.residual_rms,
            ResultKey.CONVERGED.value: self.converged,
            ResultKey.RATE.value: self.rate,
        }


@dataclass(frozen=True)
class WindowContrast:
    """c0 + ½·c1·cos(ω1 t + φ1) with c1 >= 0; ω1 is NaN for a flat window."""

    c0: float
    c1: float
    omega1: float
    phi1: float

    @property
    def omega_defined(self) -> bool:
        return math.isfinite(self.omega1)


@dataclass(frozen=True, eq=False)
class MonteCarloSignal:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_traj: int

    def to_columns(self) -> Dict[str, np.ndarray]:
        return {
            ResultKey.TIME_US.value: self.times * 1e6,
            ResultKey.MEAN.value: self.mean,
            ResultKey.STDERR.value: self.stderr,
        }


@dataclass(frozen=True, eq=False)
class MonteCarloRate:
    rate: float
    half_width: float
    fit: FitResult
    signal: MonteCarloSignal

    def to_dict(self) -> Dict[str, Any]:
        return {
            ResultKey.RATE.value: self.rate,
            ResultKey.HALF_WIDTH.value: self.half_width,
            ResultKey.N_TRAJ.value: self.signal.n_traj,
            ResultKey.FIT.value: self.fit.to_dict(),
        }


@dataclass(frozen=True)
class CoherencePoint:
    """Fitted ensemble coherence time at one (Ω, δ); tau is NaN when the fit failed."""

    Omega: float
    delta: float
    tau: float
    converged: bool


@dataclass(frozen=True, eq=False)
class SweepGrid2D:
    Omega: np.ndarray
    delta: np.ndarray

    def __post_init__(self) -> None:
        for name in ("Omega", "delta"):
            values = np.asarray(getattr(self, name), dtype=float).ravel()
            if values.size == 0:
                raise InvalidConfigError(f"'{name}' sweep values must be nonempty")
            if not np.all(np.isfinite(values)) or np.any(np.diff(values) <= 0):
                raise InvalidConfigError(f"'{name}' sweep values must be finite and strictly increasing")
            object.__setattr__(self, name, values)

    @classmethod
    def linspace(cls, Omega: Tuple[float, float, int], delta: Tuple[float, float, int]) -> "SweepGrid2D":
        return cls(np.linspace(*Omega), np.linspace(*delta))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.Omega.size, self.delta.size


@dataclass(frozen=True, eq=False)
class ContrastMap:
    """c1 over (Ω, δ) with the detuning FWHM and resonance locus per Ω column."""

    sweep: SweepGrid2D
    c1: np.ndarray
    rho: float
    mode: ContrastMode
    fwhm: np.ndarray = field(default_factory=lambda: np.empty(0))
    locus: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            ResultKey.RHO.value: self.rho,
            ResultKey.MODE.value: self.mode.value,
            ResultKey.RABI_MHZ.value: (self.sweep.Omega / TWO_PI / 1e6).tolist(),
            ResultKey.FWHM_MHZ.value: (self.fwhm / TWO_PI / 1e6).tolist(),
            ResultKey.LOCUS_MHZ.value: (self.locus / TWO_PI / 1e6).tolist(),
        }
