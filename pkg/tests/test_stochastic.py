"""Unit tests for noise sources and the Monte Carlo simulator."""
import math
from unittest.mock import MagicMock

import numpy as np
import pytest

from src.ccdlab.drive import DEFAULT_OMEGA0, TWO_PI, DriveConfig, InhomogeneityModel, QubitState
from src.ccdlab.enums import BlochAxis, FitModelKind, Frame, Modulation, NoiseTarget, Scenario
from src.ccdlab.errors import InvalidConfigError, UnsupportedSpectrumError
from src.ccdlab.schemas import TimeGrid
from src.ccdlab.services.ensemble import EnsembleService
from src.ccdlab.services.evolution import EvolutionService
from src.ccdlab.services.floquet import FloquetAnalyzer
from src.ccdlab.services.gbe import RelaxationRateCalculator
from src.ccdlab.services.parallel import ParallelMapper
from src.ccdlab.services.stochastic import (
    MonteCarloSimulator, NoiseTrajectorySpec, OUSource, StaticGaussianSource, WhiteBandLimitedSource,
    ou_trajectory, trajectory_rng,
)
from src.ccdlab.spectra import Lorentzian, NoisePSDSet, SpectrumSum, StaticGaussian, White

MHZ = TWO_PI * 1e6


class TestNoiseSources:

    def test_ou_trajectory_statistics(self):
        # Arrange: 2000 correlation times at 100 samples per τc.
        spec = NoiseTrajectorySpec.ou(variance=4.0, tau_c=1e-6, target=NoiseTarget.XI_Z, seed=7)

        # Act
        x = ou_trajectory(spec, dt=1e-8, n=200_000)

        # Assert
        assert np.var(x) == pytest.approx(4.0, rel=0.15)
        lag = 100
        correlation = np.mean(x[:-lag] * x[lag:]) / np.var(x)
        assert correlation == pytest.approx(math.exp(-1.0), abs=0.1)

    def test_ou_trajectory_is_seeded(self):
        spec = NoiseTrajectorySpec.ou(1.0, 1e-6, NoiseTarget.XI_Z, seed=3)
        assert np.array_equal(ou_trajectory(spec, 1e-8, 500), ou_trajectory(spec, 1e-8, 500))

    def test_ou_trajectory_needs_ou_source(self):
        spec = NoiseTrajectorySpec(StaticGaussianSource(1.0), NoiseTarget.XI_Z, seed=1)
        with pytest.raises(InvalidConfigError, match="OU source"):
            ou_trajectory(spec, 1e-8, 10)

    def test_ou_empty_and_single_sample(self):
        spec = NoiseTrajectorySpec.ou(1.0, 1e-6, NoiseTarget.XI_Z, seed=3)
        assert ou_trajectory(spec, 1e-8, 0).size == 0
        assert ou_trajectory(spec, 1e-8, 1).shape == (1,)

    def test_trajectory_streams_are_independent(self):
        a = trajectory_rng(1, 2, 0).standard_normal(4)
        b = trajectory_rng(1, 2, 1).standard_normal(4)
        assert not np.array_equal(a, b)
        assert np.array_equal(a, trajectory_rng(1, 2, 0).standard_normal(4))

    def test_white_source_holds_over_cutoff_interval(self):
        # Arrange
        source = WhiteBandLimitedSource(level=1.0, cutoff=math.pi / 4e-9)

        # Act
        x = source.realize(np.random.default_rng(0), dt=1e-9, n=12)

        # Assert
        assert source.hold_steps(1e-9) == 4
        assert np.all(x.reshape(3, 4) == x.reshape(3, 4)[:, :1])

    def test_static_source_is_constant(self):
        x = StaticGaussianSource(2.0).realize(np.random.default_rng(0), 1e-9, 50)
        assert np.all(x == x[0])

    def test_negative_variance_rejected(self):
        with pytest.raises(InvalidConfigError, match="'variance'"):
            OUSource(-1.0, 1e-6)

    def test_seed_range_checked(self):
        with pytest.raises(InvalidConfigError, match="'seed'"):
            NoiseTrajectorySpec.ou(1.0, 1e-6, NoiseTarget.XI_Z, seed=-1)


class TestFromSpectrum:

    def test_lorentzian_maps_to_half_variance(self):
        spec = NoiseTrajectorySpec.from_spectrum(Lorentzian(8.0, 2e-6), NoiseTarget.XI_OMEGA, seed=1)
        assert spec.source == OUSource(4.0, 2e-6)
        assert spec.target is NoiseTarget.XI_OMEGA

    def test_white_maps_to_half_level(self):
        spec = NoiseTrajectorySpec.from_spectrum(White(6.0), NoiseTarget.XI_Z, seed=1, cutoff=1e9)
        assert spec.source == WhiteBandLimitedSource(3.0, 1e9)

    def test_static_maps_to_half_sigma(self):
        spec = NoiseTrajectorySpec.from_spectrum(StaticGaussian(2.0), NoiseTarget.XI_Z, seed=1)
        assert spec.source == StaticGaussianSource(1.0)

    def test_sum_must_be_split(self):
        with pytest.raises(UnsupportedSpectrumError, match="one by one"):
            NoiseTrajectorySpec.from_spectrum(SpectrumSum((White(1.0),)), NoiseTarget.XI_Z, seed=1)

    def test_realized_lorentzian_periodogram(self):
        # Arrange: 200 segments of 4096 samples at 100 samples per τc.
        member = Lorentzian.from_sigma(1 * MHZ, 1e-6)
        spec = NoiseTrajectorySpec.from_spectrum(member, NoiseTarget.XI_Z, seed=5)
        dt, n_seg, n = 1e-8, 200, 4096

        # Act
        x = ou_trajectory(spec, dt, n_seg * n).reshape(n_seg, n)
        periodogram = dt / n * np.mean(np.abs(np.fft.rfft(x, axis=1)) ** 2, axis=0)
        nu = TWO_PI * np.fft.rfftfreq(n, dt)

        # Assert: the realized process carries half of the member's power.
        for nu_tau in (1.0, 2.0, 4.0):
            k = int(np.argmin(np.abs(nu * member.tau_c - nu_tau)))
            band = slice(k - 3, k + 4)
            assert np.mean(periodogram[band]) == pytest.approx(0.5 * np.mean(member(nu[band])), rel=0.1)


class TestMonteCarloSimulator:

    def setup_method(self):
        self.logger = MagicMock()
        self.evolution = EvolutionService(self.logger)
        self.simulator = MonteCarloSimulator(self.evolution, self.logger)

    def test_noiseless_trajectories_repeat_the_signal(self):
        # Arrange
        cfg = DriveConfig.rotating(Omega=5 * MHZ)
        grid = TimeGrid.span(1e-6, 51)

        # Act
        signals = self.simulator.trajectory_signals(cfg, [], QubitState.ground(), grid, n_traj=3, base_seed=0)

        # Assert
        assert signals.shape == (3, 51)
        assert np.allclose(signals, np.cos(0.5 * cfg.Omega * grid.times) ** 2, atol=1e-8)

    def test_duplicate_source_on_target_rejected(self):
        specs = [
            NoiseTrajectorySpec.ou(1.0, 1e-6, NoiseTarget.XI_Z, seed=1),
            NoiseTrajectorySpec.ou(2.0, 1e-6, NoiseTarget.XI_Z, seed=2),
        ]
        with pytest.raises(InvalidConfigError, match="more than one ou source"):
            self.simulator.trajectory_signals(
                DriveConfig.rotating(Omega=5 * MHZ), specs, QubitState.ground(), TimeGrid.span(1e-6, 11), 4, 0)

    def test_different_kinds_on_one_target_allowed(self):
        specs = [
            NoiseTrajectorySpec.ou(1e10, 1e-6, NoiseTarget.XI_Z, seed=1),
            NoiseTrajectorySpec(StaticGaussianSource(1e5), NoiseTarget.XI_Z, seed=2),
        ]
        signals = self.simulator.trajectory_signals(
            DriveConfig.rotating(Omega=5 * MHZ), specs, QubitState.ground(), TimeGrid.span(1e-6, 11), 2, 0)
        assert signals.shape == (2, 11)

    def test_zero_trajectories_rejected(self):
        with pytest.raises(InvalidConfigError, match="'n_traj'"):
            self.simulator.trajectory_signals(
                DriveConfig.rotating(Omega=5 * MHZ), [], QubitState.ground(), TimeGrid.span(1e-6, 11), 0, 0)

    def test_thread_count_does_not_change_results(self):
        # Arrange
        cfg = DriveConfig.resonant(Omega=5 * MHZ, eps_m=0.5 * MHZ)
        specs = [NoiseTrajectorySpec.ou((0.2 * MHZ) ** 2, 1e-6, NoiseTarget.XI_Z, seed=11)]
        grid = TimeGrid.span(2e-6, 41)
        serial = MonteCarloSimulator(self.evolution, self.logger, ParallelMapper(threads=1), batch_size=4)
        threaded = MonteCarloSimulator(self.evolution, self.logger, ParallelMapper(threads=4), batch_size=4)

        # Act
        a = serial.trajectory_signals(cfg, specs, QubitState.ground(), grid, n_traj=16, base_seed=5)
        b = threaded.trajectory_signals(cfg, specs, QubitState.ground(), grid, n_traj=16, base_seed=5)

        # Assert
        assert np.array_equal(a, b)

    def test_base_seed_changes_realizations(self):
        cfg = DriveConfig.rotating(Omega=5 * MHZ)
        specs = [NoiseTrajectorySpec.ou((0.5 * MHZ) ** 2, 1e-6, NoiseTarget.XI_Z, seed=11)]
        grid = TimeGrid.span(2e-6, 21)

        a = self.simulator.trajectory_signals(cfg, specs, QubitState.ground(), grid, 4, base_seed=1)
        b = self.simulator.trajectory_signals(cfg, specs, QubitState.ground(), grid, 4, base_seed=2)

        assert not np.array_equal(a, b)

    def test_summarize_mean_and_standard_error(self):
        signals = np.array([[0.0, 1.0], [2.0, 3.0]])

        summary = MonteCarloSimulator.summarize(np.array([0.0, 1.0]), signals)

        assert summary.mean == pytest.approx([1.0, 2.0])
        assert summary.stderr == pytest.approx([1.0, 1.0])
        assert summary.n_traj == 2

    def test_tree_sum_matches_sum(self):
        rows = np.arange(21.0).reshape(7, 3)
        assert MonteCarloSimulator.tree_sum(rows) == pytest.approx(rows.sum(axis=0))

    def test_fit_decay_on_synthetic_signals(self):
        # Arrange
        t = np.linspace(0, 20e-6, 201)
        rng = np.random.default_rng(0)
        signals = 0.5 + 0.5 * np.exp(-1e5 * t) + 0.01 * rng.standard_normal((50, t.size))

        # Act
        result = self.simulator.fit_decay(t, signals, base_seed=3, n_boot=10)

        # Assert
        assert result.rate == pytest.approx(1e5, rel=0.05)
        assert 0 < result.half_width < 0.1 * result.rate
        assert result.signal.n_traj == 50

    def test_batch_size_must_be_positive(self):
        with pytest.raises(InvalidConfigError, match="'batch_size'"):
            MonteCarloSimulator(self.evolution, self.logger, batch_size=0)


@pytest.mark.slow
class TestWhiteNoiseOracle:
    """Monte Carlo rates against the analytic white-noise values."""

    def setup_method(self):
        self.logger = MagicMock()
        self.simulator = MonteCarloSimulator(EvolutionService(self.logger), self.logger, ParallelMapper(threads=4))
        self.S0 = 2e5
        self.cfg = DriveConfig.rotating(Omega=5 * MHZ)
        self.specs = [NoiseTrajectorySpec.from_spectrum(White(self.S0), NoiseTarget.XI_Z, seed=1)]
        self.grid = TimeGrid.span(10e-6, 201)

    def test_spin_locking_rate(self):
        # Arrange: the state starts along the drive axis.
        psi0 = QubitState.from_bloch_angles(math.pi / 2, 0.0)

        # Act
        result = self.simulator.mc_decay_rate(
            self.cfg, self.specs, psi0, self.grid, n_traj=2000, base_seed=0, readout=BlochAxis.X, n_boot=5)

        # Assert
        assert result.rate == pytest.approx(self.S0, rel=0.15)

    def test_rabi_decay_rate(self):
        result = self.simulator.mc_decay_rate(
            self.cfg, self.specs, QubitState.ground(), self.grid, n_traj=2000, base_seed=0,
            model=FitModelKind.DAMPED_COSINE, n_boot=5)

        assert result.rate == pytest.approx(self.S0 / 2, rel=0.15)


@pytest.mark.slow
class TestLorentzianOracle:
    """Monte Carlo rates against the analytic rates for Lorentzian noise members."""

    def setup_method(self):
        self.logger = MagicMock()
        self.simulator = MonteCarloSimulator(EvolutionService(self.logger), self.logger, ParallelMapper(threads=4))
        self.calculator = RelaxationRateCalculator(self.logger)

    @staticmethod
    def _specs(psd):
        members = [(psd.S_z, NoiseTarget.XI_Z), (psd.S_Omega, NoiseTarget.XI_OMEGA)]
        return [NoiseTrajectorySpec.from_spectrum(member, target, seed=seed)
                for seed, (member, target) in enumerate(members, start=1)]

    def _rate(self, cfg, psd, psi0, grid, readout, frame=Frame.FRAME1, model=FitModelKind.EXPONENTIAL):
        return self.simulator.mc_decay_rate(
            cfg, self._specs(psd), psi0, grid, n_traj=2000, base_seed=0, model=model, readout=readout,
            frame=frame, n_boot=5).rate

    def test_detuned_spin_locking_along_tilted_field(self):
        # Arrange: δ = Ω tilts the field to (1, 0, -1)/√2.
        Omega = delta = 2 * MHZ
        psd = NoisePSDSet(S_z=Lorentzian.from_sigma(0.37 * MHZ, 0.05e-6), S_Omega=White(1e5))
        cfg = DriveConfig.rotating(Omega=Omega, delta=delta)
        expected = self.calculator.rates_single_detuned(psd, Omega, delta, DEFAULT_OMEGA0)

        # Act
        rate = self._rate(cfg, psd, QubitState.from_bloch_angles(3 * math.pi / 4, 0.0), TimeGrid.span(10e-6, 201),
                          readout=np.array([1.0, 0.0, -1.0]))

        # Assert
        assert rate == pytest.approx(expected.rate_1, rel=0.15)

    def test_detuned_rabi_decay(self):
        # Arrange: +y is transverse to the tilted field.
        Omega = delta = 2 * MHZ
        psd = NoisePSDSet(S_z=Lorentzian.from_sigma(0.37 * MHZ, 0.05e-6), S_Omega=White(1e5))
        cfg = DriveConfig.rotating(Omega=Omega, delta=delta)
        expected = self.calculator.rates_single_detuned(psd, Omega, delta, DEFAULT_OMEGA0)

        # Act
        rate = self._rate(cfg, psd, QubitState.from_bloch_angles(math.pi / 2, math.pi / 2),
                          TimeGrid.span(10e-6, 401), readout=BlochAxis.Y, model=FitModelKind.DAMPED_COSINE)

        # Assert
        assert rate == pytest.approx(expected.rate_2, rel=0.15)

    def _ccd(self, modulation, scenario):
        Omega, eps_m = 5 * MHZ, 0.5 * MHZ
        psd = NoisePSDSet(S_z=White(1e5), S_Omega=Lorentzian.from_sigma(0.18 * MHZ, 0.3e-6))
        cfg = DriveConfig.resonant(Omega=Omega, eps_m=eps_m, modulation=modulation)
        return cfg, psd, self.calculator.rates(scenario, psd, Omega, DEFAULT_OMEGA0, eps_m=eps_m)

    @pytest.mark.parametrize("modulation,scenario", [
        (Modulation.AMPLITUDE, Scenario.CCD_AMPLITUDE), (Modulation.PHASE, Scenario.CCD_PHASE)])
    def test_ccd_spin_locking_along_modulation_field(self, modulation, scenario):
        # Arrange: ε_m = Ω/10 keeps both members inside the second-frame validity range.
        cfg, psd, expected = self._ccd(modulation, scenario)

        # Act
        rate = self._rate(cfg, psd, QubitState.from_bloch_angles(math.pi / 2, math.pi / 2),
                          TimeGrid.span(20e-6, 401), readout=BlochAxis.Y, frame=Frame.FRAME2)

        # Assert
        assert expected.valid
        assert rate == pytest.approx(expected.rate_1, rel=0.15)

    @pytest.mark.parametrize("modulation,scenario", [
        (Modulation.AMPLITUDE, Scenario.CCD_AMPLITUDE), (Modulation.PHASE, Scenario.CCD_PHASE)])
    def test_ccd_precession_decay(self, modulation, scenario):
        cfg, psd, expected = self._ccd(modulation, scenario)

        rate = self._rate(cfg, psd, QubitState.from_bloch_angles(math.pi / 2, 0.0), TimeGrid.span(20e-6, 401),
                          readout=BlochAxis.X, frame=Frame.FRAME2, model=FitModelKind.DAMPED_COSINE)

        assert rate == pytest.approx(expected.rate_2, rel=0.15)


@pytest.mark.slow
class TestStaticEnsembleOracle:

    def test_power_spread_matches_quadrature_average(self):
        # Arrange: a 5% static spread of the drive amplitude.
        logger = MagicMock()
        evolution = EvolutionService(logger)
        simulator = MonteCarloSimulator(evolution, logger, ParallelMapper(threads=4))
        ensemble = EnsembleService(FloquetAnalyzer(evolution, logger), logger)
        Omega, spread = 5 * MHZ, 0.05
        grid = TimeGrid.span(4e-6, 81)
        specs = [NoiseTrajectorySpec(StaticGaussianSource(spread * Omega), NoiseTarget.XI_OMEGA, seed=3)]

        # Act
        mc = simulator.mc_signal(DriveConfig.rotating(Omega=Omega), specs, QubitState.ground(), grid,
                                 n_traj=1000, base_seed=0)
        quadrature = ensemble.ensemble_rabi(Omega, 0.0, InhomogeneityModel.single(sigma_Omega_rel=spread), grid)

        # Assert
        inside = np.abs(mc.mean - 0.5 - quadrature) <= 3 * mc.stderr + 1e-9
        assert np.mean(inside) >= 0.95
        assert np.max(np.abs(mc.mean - 0.5 - quadrature)) < 5 * np.max(mc.stderr)
