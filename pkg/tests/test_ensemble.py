"""Unit tests for EnsembleService."""
import math
from unittest.mock import MagicMock

import numpy as np
import pytest

from src.ccdlab.drive import TWO_PI, DriveConfig, InhomogeneityModel, QubitState
from src.ccdlab.enums import ContrastMode, Modulation, RabiPrefactor
from src.ccdlab.errors import InvalidConfigError
from src.ccdlab.schemas import SweepGrid2D, TimeGrid
from src.ccdlab.services.ensemble import EnsembleService, gauss_nodes
from src.ccdlab.services.evolution import EvolutionService
from src.ccdlab.services.floquet import FloquetAnalyzer

MHZ = TWO_PI * 1e6


class TestGaussNodes:

    def test_weights_normalized_with_unit_variance(self):
        x, w = gauss_nodes(24)
        assert w.sum() == pytest.approx(1.0)
        assert np.sum(w * x * x) == pytest.approx(1.0, rel=1e-6)
        assert np.all(np.abs(x) <= 5.0)

    def test_inactive_axis_is_one_node(self):
        x, w = gauss_nodes(24, active=False)
        assert x.tolist() == [0.0]
        assert w.tolist() == [1.0]

    def test_order_must_be_positive(self):
        with pytest.raises(InvalidConfigError, match="order"):
            gauss_nodes(0)


class TestEnsembleRabi:

    def setup_method(self):
        self.logger = MagicMock()
        self.service = EnsembleService(FloquetAnalyzer(EvolutionService(self.logger), self.logger), self.logger)

    def test_homogeneous_signal_is_a_rabi_cosine(self):
        # Arrange
        Omega = 5 * MHZ
        grid = TimeGrid.span(2e-6, 201)

        # Act
        signal = self.service.ensemble_rabi(Omega, 0.0, InhomogeneityModel.single(), grid)

        # Assert
        assert signal == pytest.approx(0.5 * np.cos(Omega * grid.times), abs=1e-12)

    def test_prefactor_choice_under_detuning(self):
        Omega, delta = 3 * MHZ, 4 * MHZ
        grid = TimeGrid.span(1e-6, 11)
        inhom = InhomogeneityModel.single()

        linear = self.service.ensemble_rabi(Omega, delta, inhom, grid, RabiPrefactor.LINEAR)
        standard = self.service.ensemble_rabi(Omega, delta, inhom, grid, RabiPrefactor.STANDARD)

        assert linear[0] == pytest.approx(0.5 * 3 / 5)
        assert standard[0] == pytest.approx(0.5 * 9 / 25)

    def test_intrinsic_decay_applied(self):
        grid = TimeGrid.span(2e-6, 3)
        signal = self.service.ensemble_rabi(5 * MHZ, 0.0, InhomogeneityModel.single(tau0=1e-6), grid)
        assert abs(signal[-1]) <= 0.5 * math.exp(-2.0) + 1e-12

    def test_quadrature_orders_grow_with_spread(self):
        inhom = InhomogeneityModel.nv_default()
        short = EnsembleService.quadrature_orders(7.5 * MHZ, inhom, 1e-6, 24)
        long = EnsembleService.quadrature_orders(7.5 * MHZ, inhom, 20e-6, 24)
        assert long[0] > short[0]
        assert long[1] > short[1]

    def test_drive_must_be_positive(self):
        with pytest.raises(InvalidConfigError, match="'Omega'"):
            self.service.ensemble_rabi(0.0, 0.0, InhomogeneityModel.single(), TimeGrid.span(1e-6, 3))

    def test_coherence_time_on_microsecond_scale(self):
        # Arrange
        inhom = InhomogeneityModel.single(sigma_Omega_rel=0.016, sigma_omega=0.32 * MHZ, tau0=13e-6)
        grid = TimeGrid.span(5e-6, 2001)

        # Act
        points = self.service.coherence_vs_power([7.5 * MHZ], inhom, grid)

        # Assert
        assert points[0].converged
        assert 0.5e-6 <= points[0].tau <= 2e-6

    def test_coherence_vs_detuning_keeps_order(self):
        inhom = InhomogeneityModel.single(sigma_Omega_rel=0.016, sigma_omega=0.32 * MHZ, tau0=13e-6)
        deltas = [0.0, 1 * MHZ, 2 * MHZ]

        points = self.service.coherence_vs_detuning(7.5 * MHZ, deltas, inhom, TimeGrid.span(5e-6, 1001))

        assert [p.delta for p in points] == deltas


class TestFwhm:

    def test_linear_interpolation_of_crossings(self):
        delta = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        row = np.array([0.0, 0.4, 1.0, 0.4, 0.0])
        assert EnsembleService.fwhm(delta, row) == pytest.approx(2 * (1 - 1 / 6))

    def test_sample_on_half_maximum_is_not_a_crossing(self):
        delta = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        assert EnsembleService.fwhm(delta, np.array([0.0, 0.5, 1.0, 0.5, 0.0])) == pytest.approx(2.0)

    def test_missing_crossing_gives_nan(self):
        delta = np.array([0.0, 1.0, 2.0])
        assert math.isnan(EnsembleService.fwhm(delta, np.array([1.0, 0.9, 0.8])))

    def test_all_nan_row(self):
        assert math.isnan(EnsembleService.fwhm(np.array([0.0, 1.0]), np.array([math.nan, math.nan])))


class TestContrastMap:

    def setup_method(self):
        self.logger = MagicMock()
        self.service = EnsembleService(FloquetAnalyzer(EvolutionService(self.logger), self.logger), self.logger)
        self.template = DriveConfig.rotating(Omega=10 * MHZ, omega_m=10 * MHZ, modulation=Modulation.AMPLITUDE)
        self.window = TimeGrid(50e-6, 50.5e-6, 201)

    def test_unmodulated_template_rejected(self):
        sweep = SweepGrid2D.linspace((5 * MHZ, 10 * MHZ, 2), (-1 * MHZ, 1 * MHZ, 3))
        with pytest.raises(InvalidConfigError, match="modulated drive"):
            self.service.contrast_map(DriveConfig.rotating(Omega=10 * MHZ), sweep, self.window, 0.5,
                                      QubitState.ground())

    def test_ensemble_mode_needs_model(self):
        sweep = SweepGrid2D.linspace((5 * MHZ, 10 * MHZ, 2), (-1 * MHZ, 1 * MHZ, 3))
        with pytest.raises(InvalidConfigError, match="inhomogeneity model"):
            self.service.contrast_map(self.template, sweep, self.window, 0.5, QubitState.ground(),
                                      mode=ContrastMode.ENSEMBLE)

    def test_map_shape_and_resonance_locus(self):
        sweep = SweepGrid2D.linspace((6 * MHZ, 10 * MHZ, 2), (-2 * MHZ, 2 * MHZ, 3))

        result = self.service.contrast_map(self.template, sweep, self.window, 0.5, QubitState.ground(), n_max=4)

        assert result.c1.shape == (2, 3)
        assert result.locus[0] == pytest.approx(8 * MHZ)
        assert result.locus[1] == pytest.approx(0.0)

    @pytest.mark.slow
    def test_strong_modulation_broadens_the_ridge(self):
        # Arrange
        sweep = SweepGrid2D(np.array([10 * MHZ]), np.linspace(-20, 20, 41) * MHZ)

        # Act
        strong = self.service.contrast_map(self.template, sweep, self.window, 1 / 2, QubitState.ground())
        weak = self.service.contrast_map(self.template, sweep, self.window, 1 / 25, QubitState.ground())

        # Assert
        assert strong.fwhm[0] > weak.fwhm[0]
        assert strong.fwhm[0] > 2.2 * MHZ
