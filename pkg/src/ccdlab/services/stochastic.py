"""Classical noise realizations and Monte Carlo decoherence.

Trajectory k of a noise spec draws from
``SeedSequence([base_seed, spec.seed], spawn_key=(k,))``, so every
realization is fixed by (base_seed, spec.seed, k) alone. Trajectories run in
fixed batches and the mean is a pairwise tree sum in trajectory order; the
thread count never changes a result.

Spectral members are realized under the rate normalization of the analytic
relaxation formulas: a Lorentzian of variance v becomes an OU process of
variance v/2, a white level S a band-limited white process of level S/2 and
a static detuning spread σ a static ξ_z offset of σ/2.
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from ..drive import DriveConfig, Frame1Hamiltonian, QubitState, bloch_components, frame1_components
from ..enums import BlochAxis, FitModelKind, Frame, Modulation, NoiseSourceKind, NoiseTarget
from ..errors import FitFailureError, InvalidConfigError, UnsupportedSpectrumError
from ..interfaces import IGenerator, ILogger, INoiseSource, ISpectralFunction
from ..schemas import MonteCarloRate, MonteCarloSignal, TimeGrid
from ..spectra import Lorentzian, StaticGaussian, White
from .analysis import FitModels, SignalAnalyzer
from .evolution import EvolutionService, Readout, readout_vector
from .logging import timed
from .parallel import ParallelMapper

_SEED_LIMIT = 2 ** 64
_BATCH = 64
_STEPS_PER_TAU = 10
_AMPLITUDE_ALLOWANCE = 8.0
_FIT_WINDOW_RATES = 3.0
_BOOTSTRAP_KEY = 0xB007
_BOOTSTRAP_Z = 1.96


@dataclass(frozen=True)
class OUSource(INoiseSource):
    """Stationary Ornstein-Uhlenbeck process, correlation variance·e^{-|Δt|/τc}."""

    variance: float
    tau_c: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.variance) and self.variance >= 0):
            raise InvalidConfigError(f"'variance' must be finite and >= 0, got {self.variance!r}")
        if not (math.isfinite(self.tau_c) and self.tau_c > 0):
            raise InvalidConfigError(f"'tau_c' must be finite and > 0, got {self.tau_c!r}")

    @property
    def kind(self) -> NoiseSourceKind:
        return NoiseSourceKind.OU

    def magnitude(self) -> float:
        return math.sqrt(self.variance)

    def realize(self, rng: np.random.Generator, dt: float, n: int) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        sigma = math.sqrt(self.variance)
        g = rng.standard_normal(n)
        if sigma == 0:
            return np.zeros(n)
        a = math.exp(-dt / self.tau_c)
        b = sigma * math.sqrt(-math.expm1(-2.0 * dt / self.tau_c))
        x0 = sigma * g[0]
        if n == 1:
            return np.array([x0])
        rest, _ = lfilter([b], [1.0, -a], g[1:], zi=[a * x0])
        return np.concatenate([[x0], rest])


@dataclass(frozen=True)
class WhiteBandLimitedSource(INoiseSource):
    """White noise of two-sided level ``level`` held over intervals of π/cutoff.

    Each held value has variance level·cutoff/π; when the hold interval is
    shorter than a step the samples are independent with variance level/dt.
    """

    level: float
    cutoff: float = math.inf

    def __post_init__(self) -> None:
        if not (math.isfinite(self.level) and self.level >= 0):
            raise InvalidConfigError(f"'level' must be finite and >= 0, got {self.level!r}")
        if not self.cutoff > 0:
            raise InvalidConfigError(f"'cutoff' must be > 0, got {self.cutoff!r}")

    @property
    def kind(self) -> NoiseSourceKind:
        return NoiseSourceKind.WHITE_BAND_LIMITED

    def magnitude(self) -> float:
        return math.sqrt(self.level * self.cutoff / math.pi) if math.isfinite(self.cutoff) else 0.0

    def hold_steps(self, dt: float) -> int:
        return max(1, round(math.pi / (self.cutoff * dt))) if math.isfinite(self.cutoff) else 1

    def realize(self, rng: np.random.Generator, dt: float, n: int) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        hold = self.hold_steps(dt)
        draws = rng.standard_normal(-(-n // hold))
        return np.repeat(draws * math.sqrt(self.level / (hold * dt)), hold)[:n]


@dataclass(frozen=True)
class StaticGaussianSource(INoiseSource):
    """One Gaussian value per realization, constant in time."""

    sigma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise InvalidConfigError(f"'sigma' must be finite and >= 0, got {self.sigma!r}")

    @property
    def kind(self) -> NoiseSourceKind:
        return NoiseSourceKind.STATIC_GAUSSIAN

    def magnitude(self) -> float:
        return self.sigma

    def realize(self, rng: np.random.Generator, dt: float, n: int) -> np.ndarray:
        return np.full(n, self.sigma * rng.standard_normal())


@dataclass(frozen=True)
class NoiseTrajectorySpec:
    source: INoiseSource
    target: NoiseTarget
    seed: int

    def __post_init__(self) -> None:
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < _SEED_LIMIT:
            raise InvalidConfigError(f"'seed' must be an integer in [0, 2^64), got {self.seed!r}")

    @property
    def kind(self) -> NoiseSourceKind:
        return self.source.kind

    @classmethod
    def ou(cls, variance: float, tau_c: float, target: NoiseTarget, seed: int) -> "NoiseTrajectorySpec":
        return cls(OUSource(variance, tau_c), target, seed)

    @classmethod
    def from_spectrum(cls, member: ISpectralFunction, target: NoiseTarget, seed: int,
                      cutoff: float = math.inf) -> "NoiseTrajectorySpec":
        """Process whose decay rates match the analytic formulas fed with ``member``."""
        if isinstance(member, Lorentzian):
            return cls(OUSource(0.5 * member.variance, member.tau_c), target, seed)
        if isinstance(member, White):
            return cls(WhiteBandLimitedSource(0.5 * member.level, cutoff), target, seed)
        if isinstance(member, StaticGaussian):
            return cls(StaticGaussianSource(0.5 * member.sigma), target, seed)
        raise UnsupportedSpectrumError(
            f"cannot realize a {type(member).__name__} spectrum; pass its Lorentzian/white/static members one by one"
        )

    @classmethod
    def detuning_spread(cls, sigma_omega: float, seed: int) -> "NoiseTrajectorySpec":
        """Static detuning spread σ_ω; enters as ξ_z = -δ/2 with std σ_ω/2."""
        return cls(StaticGaussianSource(0.5 * sigma_omega), NoiseTarget.XI_Z, seed)


def ou_trajectory(spec: NoiseTrajectorySpec, dt: float, n: int) -> np.ndarray:
    """OU series of ``spec`` drawn from ``default_rng(spec.seed)``.

    Exact update x_{k+1} = x_k·e^{-dt/τc} + σ·sqrt(1 - e^{-2dt/τc})·g_k,
    started in the stationary distribution.
    """
    if not isinstance(spec.source, OUSource):
        raise InvalidConfigError(f"ou_trajectory needs an OU source, got {type(spec.source).__name__}")
    if not dt > 0:
        raise InvalidConfigError(f"'dt' must be > 0, got {dt}")
    if n < 0:
        raise InvalidConfigError(f"'n' must be >= 0, got {n}")
    return spec.source.realize(np.random.default_rng(spec.seed), dt, n)


def trajectory_rng(base_seed: int, spec_seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base_seed, spec_seed], spawn_key=(k,)))


class NoisyFrame1Hamiltonian(IGenerator):
    """First-frame generator of a batch of noise realizations.

    ``noise`` maps each target to an array (batch, n_steps) of values held
    over integration steps of length ``h`` starting at ``t0``.
    """

    def __init__(self, cfg: DriveConfig, noise: Dict[NoiseTarget, np.ndarray], batch: int, t0: float, h: float):
        self._cfg = cfg
        self._noise = noise
        self._batch = batch
        self._t0 = t0
        self._h = h

    def _at(self, target: NoiseTarget, index: np.ndarray) -> object:
        values = self._noise.get(target)
        return 0.0 if values is None else values[:, index].T

    def pauli_components(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        n_steps = max(v.shape[1] for v in self._noise.values()) if self._noise else 1
        index = np.clip(np.floor((times - self._t0) / self._h).astype(int), 0, n_steps - 1)
        h = frame1_components(
            self._cfg, times[:, None],
            xi_x=self._at(NoiseTarget.XI_X, index), xi_z=self._at(NoiseTarget.XI_Z, index),
            xi_Omega=self._at(NoiseTarget.XI_OMEGA, index), xi_em=self._at(NoiseTarget.XI_EM, index),
        )
        return np.broadcast_to(h, (times.size, self._batch, 3))

    def max_frequency(self) -> float:
        peak = {target: float(np.max(np.abs(v))) if v.size else 0.0 for target, v in self._noise.items()}
        return Frame1Hamiltonian(self._cfg).max_frequency() + _noise_frequency(self._cfg, peak)


def _noise_frequency(cfg: DriveConfig, peak: Dict[NoiseTarget, float]) -> float:
    """Splitting added by noise of the given peak magnitudes."""
    em_weight = cfg.omega_m / cfg.Omega if cfg.modulation is Modulation.PHASE and cfg.Omega > 0 else 1.0
    field = (peak.get(NoiseTarget.XI_Z, 0.0) + 0.5 * peak.get(NoiseTarget.XI_OMEGA, 0.0)
             + em_weight * peak.get(NoiseTarget.XI_EM, 0.0) + peak.get(NoiseTarget.XI_X, 0.0))
    carrier = cfg.omega if peak.get(NoiseTarget.XI_X, 0.0) > 0 else 0.0
    return 2.0 * field + carrier


class MonteCarloSimulator:
    """Averages first-frame propagation over classical noise realizations."""

    def __init__(self, evolution: EvolutionService, logger: ILogger, mapper: Optional[ParallelMapper] = None,
                 batch_size: int = _BATCH):
        if batch_size < 1:
            raise InvalidConfigError(f"'batch_size' must be >= 1, got {batch_size}")
        self._evolution = evolution
        self._logger = logger
        self._mapper = mapper or ParallelMapper()
        self._batch_size = int(batch_size)

    @staticmethod
    def _validate(specs: Sequence[NoiseTrajectorySpec], n_traj: int) -> None:
        if n_traj < 1:
            raise InvalidConfigError(f"'n_traj' must be >= 1, got {n_traj}")
        seen = set()
        for spec in specs:
            key = (spec.target, spec.kind)
            if key in seen:
                raise InvalidConfigError(
                    f"noise target {spec.target.value} has more than one {spec.kind.value} source"
                )
            seen.add(key)

    def _substeps(self, cfg: DriveConfig, specs: Sequence[NoiseTrajectorySpec], grid: TimeGrid) -> int:
        peak: Dict[NoiseTarget, float] = {}
        for spec in specs:
            peak[spec.target] = peak.get(spec.target, 0.0) + _AMPLITUDE_ALLOWANCE * spec.source.magnitude()
        f_max = Frame1Hamiltonian(cfg).max_frequency() + _noise_frequency(cfg, peak)
        m = self._evolution.substeps_for(f_max, grid)
        for spec in specs:
            if isinstance(spec.source, OUSource):
                m = max(m, math.ceil(grid.dt * _STEPS_PER_TAU / spec.source.tau_c * (1.0 - 1e-12)))
        return m

    def _batch_signals(self, cfg: DriveConfig, specs: Sequence[NoiseTrajectorySpec], psi0: QubitState,
                       grid: TimeGrid, base_seed: int, m: int, readout: np.ndarray,
                       frame_unitaries: Optional[np.ndarray], indices: range) -> np.ndarray:
        h = grid.dt / m
        n_steps = (grid.n_points - 1) * m
        batch = len(indices)
        noise: Dict[NoiseTarget, np.ndarray] = {}
        for spec in specs:
            draws = np.stack([spec.source.realize(trajectory_rng(base_seed, spec.seed, k), h, n_steps) for k in indices])
            noise[spec.target] = noise[spec.target] + draws if spec.target in noise else draws
        generator = NoisyFrame1Hamiltonian(cfg, noise, batch, grid.t_start, h)
        psi = np.broadcast_to(psi0.vector, (batch, 2))
        states = self._evolution.propagate_states(generator, psi, grid, substeps=m)
        if frame_unitaries is not None:
            states = np.einsum("nij,nbj->nbi", frame_unitaries, states)
        return (0.5 * (1.0 + bloch_components(states) @ readout)).T

    def trajectory_signals(self, cfg: DriveConfig, specs: Sequence[NoiseTrajectorySpec], psi0: QubitState,
                           grid: TimeGrid, n_traj: int, base_seed: int, readout: Readout = BlochAxis.Z,
                           frame: Frame = Frame.FRAME1) -> np.ndarray:
        """Readout probability of every trajectory, shape (n_traj, n_points)."""
        self._validate(specs, n_traj)
        axis = readout_vector(readout)
        unitaries = None
        if frame is not Frame.FRAME1:
            unitaries = self._evolution.frame_unitaries(Frame.FRAME1, frame, cfg, grid.times)

        if not specs:
            traj = self._evolution.propagate(Frame1Hamiltonian(cfg), psi0, grid)
            if unitaries is not None:
                traj = self._evolution.to_frame(traj, frame, cfg)
            signal = self._evolution.readout(traj, axis)
            return np.broadcast_to(signal, (n_traj, signal.size)).copy()

        m = self._substeps(cfg, specs, grid)
        batches = [range(k, min(k + self._batch_size, n_traj)) for k in range(0, n_traj, self._batch_size)]
        self._logger.info(
            f"Monte Carlo: {n_traj} trajectories in {len(batches)} batches, "
            f"{(grid.n_points - 1) * m} steps each"
        )
        with timed(self._logger, f"Monte Carlo over {n_traj} trajectories"):
            parts = self._mapper.map(
                lambda indices: self._batch_signals(cfg, specs, psi0, grid, base_seed, m, axis, unitaries, indices),
                batches, description="trajectories",
            )
        return np.concatenate(parts, axis=0)

    @staticmethod
    def tree_sum(rows: np.ndarray) -> np.ndarray:
        """Pairwise sum over axis 0 in a fixed split order."""
        if rows.shape[0] == 1:
            return rows[0].copy()
        mid = rows.shape[0] // 2
        return MonteCarloSimulator.tree_sum(rows[:mid]) + MonteCarloSimulator.tree_sum(rows[mid:])

    @classmethod
    def summarize(cls, times: np.ndarray, signals: np.ndarray) -> MonteCarloSignal:
        n = signals.shape[0]
        mean = cls.tree_sum(signals) / n
        if n == 1:
            stderr = np.zeros_like(mean)
        else:
            stderr = np.sqrt(cls.tree_sum((signals - mean) ** 2) / (n - 1) / n)
        return MonteCarloSignal(times=times, mean=mean, stderr=stderr, n_traj=n)

    def mc_signal(self, cfg: DriveConfig, specs: Sequence[NoiseTrajectorySpec], psi0: QubitState, grid: TimeGrid,
                  n_traj: int, base_seed: int, readout: Readout = BlochAxis.Z,
                  frame: Frame = Frame.FRAME1) -> MonteCarloSignal:
        """Mean readout probability and its standard error per grid point."""
        signals = self.trajectory_signals(cfg, specs, psi0, grid, n_traj, base_seed, readout, frame)
        return self.summarize(grid.times, signals)

    @staticmethod
    def _fit_window(times: np.ndarray, rate: float, n_params: int) -> int:
        """Number of leading samples within 3/rate, or all of them."""
        if rate <= 0:
            return times.size
        cut = int(np.searchsorted(times, times[0] + _FIT_WINDOW_RATES / rate, side="right"))
        return times.size if cut < 8 * n_params else cut

    def fit_decay(self, times: np.ndarray, signals: np.ndarray, base_seed: int,
                  model: FitModelKind = FitModelKind.EXPONENTIAL, n_components: int = 1,
                  n_boot: int = 20) -> MonteCarloRate:
        """Decay rate of the mean of ``signals`` with a bootstrap 95% half-width.

        The fit is repeated once on the first 3/rate of the signal; the same
        window is used for every bootstrap resample.
        """
        summary = self.summarize(times, signals)
        n_params = len(FitModels.names(model, n_components))

        fit = SignalAnalyzer.fit(times, summary.mean, model, n_components)
        window = self._fit_window(times, fit.rate, n_params)
        if window < times.size:
            fit = SignalAnalyzer.fit(times[:window], summary.mean[:window], model, n_components, hints=fit.params)
        hints = fit.params if fit.rate > 0 else None

        rng = np.random.default_rng(np.random.SeedSequence([base_seed, _BOOTSTRAP_KEY]))
        rates: List[float] = []
        for _ in range(n_boot):
            picks = rng.integers(0, signals.shape[0], signals.shape[0])
            resample = self.tree_sum(signals[picks, :window]) / signals.shape[0]
            try:
                rates.append(SignalAnalyzer.fit(times[:window], resample, model, n_components, hints=hints).rate)
            except FitFailureError as e:
                self._logger.warning(f"Bootstrap fit skipped: {e}")
        half_width = _BOOTSTRAP_Z * float(np.std(rates, ddof=1)) if len(rates) > 1 else math.nan
        self._logger.info(f"Monte Carlo rate {fit.rate:.6g}/s ± {half_width:.3g}/s")
        return MonteCarloRate(rate=fit.rate, half_width=half_width, fit=fit, signal=summary)

    def mc_decay_rate(self, cfg: DriveConfig, specs: Sequence[NoiseTrajectorySpec], psi0: QubitState,
                      grid: TimeGrid, n_traj: int, base_seed: int,
                      model: FitModelKind = FitModelKind.EXPONENTIAL, n_components: int = 1,
                      readout: Readout = BlochAxis.Z, frame: Frame = Frame.FRAME1,
                      n_boot: int = 20) -> MonteCarloRate:
        signals = self.trajectory_signals(cfg, specs, psi0, grid, n_traj, base_seed, readout, frame)
        return self.fit_decay(grid.times, signals, base_seed, model, n_components, n_boot)
