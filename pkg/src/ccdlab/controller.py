"""Command dispatch for the CLI.

Each ``cmd_*`` method reads its section of the run config, drives one
pipeline and hands every table and payload to the writer. Sweeps write what
they have before a later stage can fail, so a nonzero exit still leaves the
completed results on disk.
"""
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence

import numpy as np

from .config import MHZ, US, RunConfig, noise_specs
from .enums import (
    BlochAxis, Command, ContrastMode, ExitCode, FitModelKind, Frame, RabiPrefactor, RateVariant, ResultKey,
    Scenario,
)
from .errors import CcdLabError, InvalidConfigError
from .interfaces import ILogger, IResultWriter, IToolkitController
from .schemas import CoherencePoint, DecayRates
from .services.analysis import SignalAnalyzer
from .services.ensemble import EnsembleService
from .services.evolution import EvolutionService
from .services.floquet import FloquetAnalyzer
from .services.gbe import RelaxationRateCalculator
from .services.parallel import ParallelMapper
from .services.stochastic import MonteCarloSimulator

SUMMARY_NAME = "summary"


def _mhz(values: Any) -> np.ndarray:
    return np.asarray(values, dtype=float) / MHZ


class ToolkitController(IToolkitController):

    def __init__(
        self,
        rates: RelaxationRateCalculator,
        mapper: ParallelMapper,
        logger: ILogger,
        version: str = "1.0.0",
    ):
        self._rates = rates
        self._mapper = mapper
        self._logger = logger
        self._version = version
        self._commands: Dict[Command, Callable[[RunConfig, IResultWriter], List[Path]]] = {
            Command.EVOLVE: self.cmd_evolve,
            Command.FLOQUET: self.cmd_floquet,
            Command.RATES: self.cmd_rates,
            Command.MONTECARLO: self.cmd_montecarlo,
            Command.ENSEMBLE: self.cmd_ensemble,
            Command.MAP: self.cmd_map,
            Command.FIT: self.cmd_fit,
        }

    @property
    def version(self) -> str:
        return self._version

    def _evolution(self, config: RunConfig) -> EvolutionService:
        return EvolutionService(self._logger, config.evolve.steps_per_cycle)

    def _floquet(self, config: RunConfig) -> FloquetAnalyzer:
        return FloquetAnalyzer(
            self._evolution(config), self._logger, config.floquet.n_samples, config.floquet.substeps
        )

    def cmd_evolve(self, config: RunConfig, writer: IResultWriter) -> List[Path]:
        """P|0>(t) (and the readout projection) of the noiseless drive, with an optional fit."""
        section = config.evolve
        cfg = config.drive.to_drive_config()
        grid = config.grid.to_grid()
        frame = Frame(section.frame)
        readout = BlochAxis(section.readout)
        evolution = self._evolution(config)

        source = Frame.LAB if frame is Frame.LAB else Frame.FRAME1
        traj = evolution.propagate(
            evolution.generator(cfg, source, section.allow_lab), config.state.to_state(), grid, frame=source
        )
        if frame is Frame.FRAME2:
            traj = evolution.to_frame(traj, Frame.FRAME2, cfg)

        p0 = evolution.population0(traj)
        columns: Dict[str, np.ndarray] = {ResultKey.TIME_US.value: grid.times / US, ResultKey.P0.value: p0}
        if readout is not BlochAxis.Z:
            columns[ResultKey.SIGNAL.value] = evolution.readout(traj, readout)
        paths = [writer.write_table("evolve", columns)]

        if section.fit:
            values = columns.get(ResultKey.SIGNAL.value, p0)
            fit = SignalAnalyzer.fit(grid.times, values, FitModelKind(section.fit_model), section.n_components)
            paths.append(writer.write_json("evolve_fit", fit.to_dict()))
        return paths

    def cmd_floquet(self, config: RunConfig, writer: IResultWriter) -> List[Path]:
        """Quasi-energies, band table, mode-control phases and an optional gap-vs-ε_m table."""
        section = config.floquet
        cfg = config.drive.to_drive_config()
        psi0 = config.state.to_state()
        analyzer = self._floquet(config)

        if section.mode_control:
            cfg = cfg.with_phases(*analyzer.mode_control_phases(psi0, cfg, section.refine))
        fd = analyzer.analyze(cfg)
        c_plus, c_minus = analyzer.mode_decomposition(psi0, fd)
        bands = analyzer.spectrum_from(fd, psi0, section.n_max)

        gap_table: List[Dict[str, float]] = []
        if section.eps_sweep_mhz:
            eps_values = [eps * MHZ for eps in section.eps_sweep_mhz]
            for eps, point in zip(eps_values, analyzer.gap_table(cfg, eps_values)):
                gap_table.append({ResultKey.EPS_M_MHZ.value: eps / MHZ, **point.to_dict()})

        payload = {
            **fd.to_dict(),
            **bands.to_dict(),
            ResultKey.PHASES.value: {ResultKey.PHI0.value: cfg.phi0, ResultKey.PHI_M.value: cfg.phi_m},
            ResultKey.COEFFICIENTS.value: [abs(c_plus) ** 2, abs(c_minus) ** 2],
            ResultKey.GAP_TABLE.value: gap_table,
        }
        return [writer.write_json("floquet", payload)]

    def _rates_table(self, axis_key: ResultKey, axis: Sequence[float], points: List[DecayRates]) -> Dict[str, Any]:
        return {
            axis_key.value: np.asarray(axis, dtype=float),
            ResultKey.RATE_1.value: [p.rate_1 for p in points],
            ResultKey.RATE_2.value: [p.rate_2 for p in points],
            ResultKey.RATE_2_PURE.value: [p.rate_2_pure for p in points],
            ResultKey.T1_S.value: [p.t1 for p in points],
            ResultKey.T2_S.value: [p.t2 for p in points],
            ResultKey.VALID.value: [float(p.valid) for p in points],
        }

    def cmd_rates(self, config: RunConfig, writer: IResultWriter) -> List[Path]:
        """Analytic decay rates of one scenario plus optional ε_m and power sweeps."""
        section = config.rates
        drive = config.drive.to_drive_config()
        psd = config.noise.to_psd_set()
        scenario, variant = Scenario(section.scenario), RateVariant(section.variant)

        point_psd = psd
        if section.relative_em_noise and drive.Omega > 0:
            point_psd = psd.with_relative_modulation_noise(drive.eps_m, drive.Omega)
        rates = self._rates.rates(scenario, point_psd, drive.Omega, drive.omega0, drive.eps_m, drive.delta, variant)
        paths = [writer.write_json("rates", rates.to_dict())]

        if section.eps_sweep_mhz:
            eps_values = [eps * MHZ for eps in section.eps_sweep_mhz]
            points = self._rates.sweep_eps_m(
                scenario, psd, drive.Omega, eps_values, drive.omega0, variant, section.relative_em_noise
            )
            paths.append(writer.write_table(
                "rates_vs_eps_m", self._rates_table(ResultKey.EPS_M_MHZ, section.eps_sweep_mhz, points)
            ))
        if section.rabi_sweep_mhz:
            points = self._rates.sweep_Omega(
                scenario, psd, [rabi * MHZ for rabi in section.rabi_sweep_mhz], drive.omega0, drive.delta,
                section.rho, variant,
            )
            paths.append(writer.write_table(
                "rates_vs_rabi", self._rates_table(ResultKey.RABI_MHZ, section.rabi_sweep_mhz, points)
            ))
        return paths

    def cmd_montecarlo(self, config: RunConfig, writer: IResultWriter) -> List[Path]:
        """Mean ± stderr readout over noise trajectories, then the fitted decay rate."""
        section = config.montecarlo
        cfg = config.drive.to_drive_config()
        grid = config.grid.to_grid()
        simulator = MonteCarloSimulator(self._evolution(config), self._logger, self._mapper, section.batch_size)

        signals = simulator.trajectory_signals(
            cfg, noise_specs(config), config.state.to_state(), grid, section.n_traj, config.run.seed,
            BlochAxis(section.readout), Frame(section.frame),
        )
        paths = [writer.write_table("montecarlo", simulator.summarize(grid.times, signals).to_columns())]
        if section.fit:
            rate = simulator.fit_decay(
                grid.times, signals, config.run.seed, FitModelKind(section.fit_model), n_boot=section.n_boot
            )
            paths.append(writer.write_json("montecarlo_fit", rate.to_dict()))
        return paths

    @staticmethod
    def _coherence_table(axis_key: ResultKey, points: List[CoherencePoint], by_delta: bool) -> Dict[str, Any]:
        return {
            axis_key.value: _mhz([p.delta if by_delta else p.Omega for p in points]),
            ResultKey.TAU_US.value: [p.tau / US for p in points],
            ResultKey.CONVERGED.value: [float(p.converged) for p in points],
        }

    def cmd_ensemble(self, config: RunConfig, writer: IResultWriter) -> List[Path]:
        """Ensemble Rabi signal at the configured drive, then τ(Ω) and τ(δ) sweeps."""
        section = config.ensemble
        cfg = config.drive.to_drive_config()
        grid = config.grid.to_grid()
        inhom = config.inhomogeneity.to_model()
        prefactor = RabiPrefactor(section.prefactor)
        ensemble = EnsembleService(self._floquet(config), self._logger, self._mapper, section.order)

        signal = ensemble.ensemble_rabi(cfg.Omega, cfg.delta, inhom, grid, prefactor)
        paths = [writer.write_table(
            "ensemble_signal", {ResultKey.TIME_US.value: grid.times / US, ResultKey.SIGNAL.value: signal}
        )]
        if section.rabi_sweep_mhz:
            points = ensemble.coherence_vs_power(
                [rabi * MHZ for rabi in section.rabi_sweep_mhz], inhom, grid, cfg.delta, prefactor
            )
            paths.append(writer.write_table(
                "coherence_vs_rabi", self._coherence_table(ResultKey.RABI_MHZ, points, by_delta=False)
            ))
        if section.detuning_sweep_mhz:
            points = ensemble.coherence_vs_detuning(
                cfg.Omega, [delta * MHZ for delta in section.detuning_sweep_mhz], inhom, grid, prefactor
            )
            paths.append(writer.write_table(
                "coherence_vs_detuning", self._coherence_table(ResultKey.DETUNING_MHZ, points, by_delta=True)
            ))
        return paths

    def cmd_map(self, config: RunConfig, writer: IResultWriter) -> List[Path]:
        """Window contrast c1 over (Ω, δ); one row per Ω, one column per detuning."""
        section = config.map
        mode = ContrastMode(section.mode)
        sweep = section.to_sweep()
        inhom = config.inhomogeneity.to_model() if mode is ContrastMode.ENSEMBLE else None
        ensemble = EnsembleService(self._floquet(config), self._logger, self._mapper)

        result = ensemble.contrast_map(
            config.drive.to_drive_config(), sweep, section.to_window(), section.rho, config.state.to_state(),
            mode, inhom, section.n_max,
        )
        columns: Dict[str, Any] = {ResultKey.RABI_MHZ.value: _mhz(sweep.Omega)}
        for j, delta in enumerate(_mhz(sweep.delta)):
            columns[f"{ResultKey.DETUNING_MHZ.value}={delta:.6g}"] = result.c1[:, j]
        return [writer.write_table("map", columns), writer.write_json("map_summary", result.to_dict())]

    @staticmethod
    def _load_columns(path: Path) -> np.ndarray:
        if not path.is_file():
            raise InvalidConfigError(f"fit input not found: {path}")
        with open(path, encoding="utf-8") as f:
            first = f.readline().split(",")[0].strip()
        try:
            float(first)
            skip = 0
        except ValueError:
            skip = 1
        try:
            return np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2, encoding="utf-8")
        except ValueError as e:
            raise InvalidConfigError(f"fit input {path} is not a numeric CSV: {e}") from e

    def cmd_fit(self, config: RunConfig, writer: IResultWriter) -> List[Path]:
        """Fits one column of a CSV whose first column is time in μs."""
        section = config.fit
        if not section.input:
            raise InvalidConfigError("[fit].input: no input CSV given")
        data = self._load_columns(Path(section.input))
        if data.shape[1] <= section.column:
            raise InvalidConfigError(
                f"[fit].column: {section.column} is out of range for {data.shape[1]} columns"
            )
        fit = SignalAnalyzer.fit(
            data[:, 0] * US, data[:, section.column], FitModelKind(section.model), section.n_components
        )
        return [writer.write_json("fit", fit.to_dict())]

    def _summary(self, command: Command, config: RunConfig, paths: Sequence[Path]) -> Dict[str, Any]:
        return {
            ResultKey.COMMAND.value: command.value,
            ResultKey.SEED.value: config.run.seed,
            ResultKey.VERSION.value: self._version,
            ResultKey.FILES.value: [p.name for p in paths],
        }

    def run(self, command: Command, config: RunConfig, writer: IResultWriter) -> List[Path]:
        self._logger.info(f"Running {command.value} (seed {config.run.seed})")
        try:
            paths = self._commands[command](config, writer)
        except CcdLabError as e:
            partial = writer.written
            if partial:
                self._logger.warning(f"{command.value} stopped after writing {len(partial)} file(s)")
                writer.write_json(SUMMARY_NAME, {**self._summary(command, config, partial), ResultKey.ERROR.value: str(e)})
            raise
        return paths + [writer.write_json(SUMMARY_NAME, self._summary(command, config, paths))]

    def execute(self, command: Command, config: RunConfig, writer: IResultWriter) -> ExitCode:
        """Runs a command and maps its failure to an exit code."""
        try:
            self.run(command, config, writer)
        except InvalidConfigError as e:
            self._logger.error(f"Invalid configuration for {command.value}: {e}")
            return ExitCode.CONFIG_ERROR
        except CcdLabError as e:
            self._logger.error(f"{command.value} failed: {e}")
            return ExitCode.NUMERIC_FAILURE
        except Exception as e:
            self._logger.error(f"{command.value} failed unexpectedly: {e}")
            return ExitCode.NUMERIC_FAILURE
        return ExitCode.OK
