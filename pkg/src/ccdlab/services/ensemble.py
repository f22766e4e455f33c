"""Ensemble averages over static drive-strength and detuning spreads.

Each ensemble member oscillates at Ω_R = sqrt(Ω_a² + d²) with
Ω_a = Ω(1 + σ_Ω,rel·u) and d = δ - a_i + σ_ω·v for standard normal (u, v) and
hyperfine offsets a_i. The signal is

    P(t) = Σ_i ½c_i E[pref · cos(Ω_R t)] · e^{-t/τ0}

with pref = Ω_a/Ω_R (LINEAR) or Ω_a²/Ω_R² (STANDARD). The expectation is a
tensor Gauss-Hermite rule, truncated at ±5σ.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from ..drive import DriveConfig, InhomogeneityModel, QubitState
from ..enums import ContrastMode, FitModelKind, Modulation, RabiPrefactor
from ..errors import FitFailureError, InvalidConfigError
from ..interfaces import ILogger
from ..schemas import CoherencePoint, ContrastMap, SweepGrid2D, TimeGrid
from .analysis import SignalAnalyzer
from .floquet import FloquetAnalyzer
from .logging import timed
from .parallel import ParallelMapper

_DEFAULT_ORDER = 24
_MAX_ORDER = 400
_TRUNCATION = 5.0
_ORDER_PER_PHASE2 = 1.4
_CHUNK = 4_000_000
_ENSEMBLE_MAP_ORDER = 6


def gauss_nodes(order: int, active: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Standard-normal nodes and weights, |u| <= 5, weights summing to 1."""
    if not active:
        return np.zeros(1), np.ones(1)
    if order < 1:
        raise InvalidConfigError(f"quadrature order must be >= 1, got {order}")
    x, w = hermegauss(order)
    keep = np.abs(x) <= _TRUNCATION
    x, w = x[keep], w[keep] / math.sqrt(2.0 * math.pi)
    return x, w / w.sum()


class EnsembleService:
    """Inhomogeneous Rabi signals, coherence-time sweeps and contrast maps."""

    def __init__(self, floquet: FloquetAnalyzer, logger: ILogger, mapper: Optional[ParallelMapper] = None,
                 order: int = _DEFAULT_ORDER):
        if order < 1:
            raise InvalidConfigError(f"'order' must be >= 1, got {order}")
        self._floquet = floquet
        self._logger = logger
        self._mapper = mapper or ParallelMapper()
        self._order = int(order)

    @staticmethod
    def quadrature_orders(Omega: float, inhom: InhomogeneityModel, t_max: float, order: int) -> Tuple[int, int]:
        """Per-axis orders grown with the phase spread accumulated by t_max."""
        def grown(spread: float) -> int:
            return int(min(max(math.ceil(_ORDER_PER_PHASE2 * spread * spread + _DEFAULT_ORDER), order), _MAX_ORDER))

        return grown(Omega * inhom.sigma_Omega_rel * t_max), grown(inhom.sigma_omega * t_max)

    def ensemble_rabi(self, Omega: float, delta: float, inhom: InhomogeneityModel, grid: TimeGrid,
                      prefactor: RabiPrefactor = RabiPrefactor.LINEAR, order: Optional[int] = None) -> np.ndarray:
        """Ensemble Rabi signal on ``grid``; P(0) is the model's own Σ½c_i·E[pref]."""
        if not (math.isfinite(Omega) and Omega > 0):
            raise InvalidConfigError(f"'Omega' must be finite and > 0, got {Omega!r}")
        if not math.isfinite(delta):
            raise InvalidConfigError(f"'delta' must be finite, got {delta!r}")
        times = grid.times
        n_power, n_detuning = self.quadrature_orders(
            Omega, inhom, float(np.max(np.abs(times))), self._order if order is None else order
        )
        u, wu = gauss_nodes(n_power, inhom.sigma_Omega_rel > 0)
        v, wv = gauss_nodes(n_detuning, inhom.sigma_omega > 0)
        amplitude = Omega * (1.0 + inhom.sigma_Omega_rel * u)

        signal = np.zeros(times.size)
        for c, offset in zip(inhom.sublevel_populations, inhom.sublevel_offsets):
            if c == 0:
                continue
            detuning = delta - offset + inhom.sigma_omega * v
            rabi_2d = np.hypot(amplitude[:, None], detuning[None, :])
            rabi = rabi_2d.ravel()
            ratio = (amplitude[:, None] / rabi_2d).ravel()
            pref = ratio if prefactor is RabiPrefactor.LINEAR else ratio * ratio
            weights = (wu[:, None] * wv[None, :]).ravel() * pref
            step = max(1, _CHUNK // rabi.size)
            for start in range(0, times.size, step):
                block = times[start:start + step]
                signal[start:start + step] += 0.5 * c * (np.cos(np.outer(block, rabi)) @ weights)
        if math.isfinite(inhom.tau0):
            signal *= np.exp(-times / inhom.tau0)
        return signal

    def _coherence_point(self, Omega: float, delta: float, inhom: InhomogeneityModel, grid: TimeGrid,
                         prefactor: RabiPrefactor) -> CoherencePoint:
        signal = self.ensemble_rabi(Omega, delta, inhom, grid, prefactor)
        try:
            fit = SignalAnalyzer.fit(grid.times, signal, FitModelKind.DAMPED_COSINE)
        except FitFailureError as e:
            self._logger.warning(f"Coherence fit failed at Omega={Omega:.6g}, delta={delta:.6g}: {e}")
            return CoherencePoint(Omega=Omega, delta=delta, tau=math.nan, converged=False)
        return CoherencePoint(Omega=Omega, delta=delta, tau=fit.params["tau1"], converged=fit.converged)

    def coherence_vs_power(self, Omega_values: Sequence[float], inhom: InhomogeneityModel, grid: TimeGrid,
                           delta: float = 0.0,
                           prefactor: RabiPrefactor = RabiPrefactor.LINEAR) -> List[CoherencePoint]:
        """Fitted damped-cosine τ per drive strength; a failed fit gives τ = NaN."""
        with timed(self._logger, f"coherence sweep over {len(Omega_values)} powers"):
            return self._mapper.map(
                lambda Omega: self._coherence_point(float(Omega), delta, inhom, grid, prefactor),
                list(Omega_values), description="coherence vs power",
            )

    def coherence_vs_detuning(self, Omega: float, delta_values: Sequence[float], inhom: InhomogeneityModel,
                              grid: TimeGrid,
                              prefactor: RabiPrefactor = RabiPrefactor.LINEAR) -> List[CoherencePoint]:
        with timed(self._logger, f"coherence sweep over {len(delta_values)} detunings"):
            return self._mapper.map(
                lambda delta: self._coherence_point(Omega, float(delta), inhom, grid, prefactor),
                list(delta_values), description="coherence vs detuning",
            )

    def _window_signal(self, cfg: DriveConfig, psi0: QubitState, window: TimeGrid, mode: ContrastMode,
                       inhom: Optional[InhomogeneityModel], n_max: int) -> np.ndarray:
        if mode is ContrastMode.SINGLE_SPIN:
            bands = self._floquet.band_spectrum(cfg, psi0, n_max).center_only()
            return bands.reconstruct(window.times)

        assert inhom is not None
        u, wu = gauss_nodes(_ENSEMBLE_MAP_ORDER, inhom.sigma_Omega_rel > 0)
        v, wv = gauss_nodes(_ENSEMBLE_MAP_ORDER, inhom.sigma_omega > 0)
        signal = np.zeros(window.n_points)
        for c, offset in zip(inhom.sublevel_populations, inhom.sublevel_offsets):
            if c == 0:
                continue
            for ui, wi in zip(u, wu):
                for vj, wj in zip(v, wv):
                    member = cfg.replace(
                        Omega=cfg.Omega * (1.0 + inhom.sigma_Omega_rel * ui),
                        delta=cfg.delta - offset + inhom.sigma_omega * vj,
                    )
                    signal += c * wi * wj * self._floquet.band_spectrum(member, psi0, n_max).reconstruct(window.times)
        return signal

    def _contrast_point(self, cfg: DriveConfig, psi0: QubitState, window: TimeGrid, mode: ContrastMode,
                        inhom: Optional[InhomogeneityModel], n_max: int) -> float:
        signal = self._window_signal(cfg, psi0, window, mode, inhom, n_max)
        try:
            return SignalAnalyzer.window_contrast(window.times, signal).c1
        except FitFailureError as e:
            self._logger.warning(
                f"Contrast fit failed at Omega={cfg.Omega:.6g}, delta={cfg.delta:.6g}: {e}"
            )
            return math.nan

    @staticmethod
    def fwhm(delta: np.ndarray, row: np.ndarray) -> float:
        """Full width at half maximum of a c1 row; NaN if a half-maximum crossing is missing."""
        finite = np.isfinite(row)
        if not finite.any():
            return math.nan
        peak = int(np.nanargmax(row))
        half = 0.5 * row[peak]
        if half <= 0:
            return math.nan

        def crossing(indices: range) -> Optional[float]:
            previous = peak
            for i in indices:
                if not finite[i]:
                    return None
                if row[i] < half:
                    d0, d1, r0, r1 = delta[previous], delta[i], row[previous], row[i]
                    return float(d0 + (half - r0) * (d1 - d0) / (r1 - r0))
                previous = i
            return None

        left = crossing(range(peak - 1, -1, -1))
        right = crossing(range(peak + 1, delta.size))
        return math.nan if left is None or right is None else right - left

    def contrast_map(self, template: DriveConfig, sweep: SweepGrid2D, window: TimeGrid, rho: float,
                     psi0: QubitState, mode: ContrastMode = ContrastMode.SINGLE_SPIN,
                     inhom: Optional[InhomogeneityModel] = None, n_max: int = 8) -> ContrastMap:
        """Window contrast c1 over (Ω, δ) with ε_m = ρ·Ω and the template's ω_m and phases.

        SINGLE_SPIN keeps only the center band of the Floquet spectrum;
        ENSEMBLE averages full band spectra over the inhomogeneity.
        """
        if template.modulation is Modulation.NONE:
            raise InvalidConfigError("contrast maps need a modulated drive template")
        if not (math.isfinite(rho) and rho >= 0):
            raise InvalidConfigError(f"'rho' must be finite and >= 0, got {rho!r}")
        if mode is ContrastMode.ENSEMBLE and inhom is None:
            raise InvalidConfigError("ensemble contrast maps need an inhomogeneity model")
        if np.any(sweep.Omega <= 0):
            raise InvalidConfigError("'Omega' sweep values must be > 0")

        points = [(float(Omega), float(delta)) for Omega in sweep.Omega for delta in sweep.delta]

        def evaluate(point: Tuple[float, float]) -> float:
            Omega, delta = point
            cfg = template.replace(Omega=Omega, delta=delta, eps_m=rho * Omega)
            return self._contrast_point(cfg, psi0, window, mode, inhom, n_max)

        with timed(self._logger, f"contrast map of {len(points)} points"):
            c1 = np.array(self._mapper.map(evaluate, points, description="contrast map")).reshape(sweep.shape)

        fwhm = np.array([self.fwhm(sweep.delta, row) for row in c1])
        omega_m = template.omega_m
        locus = np.array([math.sqrt(omega_m ** 2 - Omega ** 2) if Omega <= omega_m else math.nan for Omega in sweep.Omega])
        return ContrastMap(sweep=sweep, c1=c1, rho=rho, mode=mode, fwhm=fwhm, locus=locus)
