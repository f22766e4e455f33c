"""Unit tests for RelaxationRateCalculator."""
from unittest.mock import MagicMock

import numpy as np
import pytest

from src.ccdlab.drive import DEFAULT_OMEGA0, TWO_PI
from src.ccdlab.enums import BlochAxis, Frame, RateVariant, Scenario
from src.ccdlab.errors import InconsistentInputError, InvalidConfigError, OutOfValidityError
from src.ccdlab.services.gbe import RelaxationRateCalculator
from src.ccdlab.spectra import Lorentzian, NoisePSDSet, White

MHZ = TWO_PI * 1e6
S0 = 1.0e4


class TestWhiteNoiseRates:

    def setup_method(self):
        self.logger = MagicMock()
        self.calculator = RelaxationRateCalculator(self.logger)
        self.psd = NoisePSDSet(S_z=White(S0))

    def test_single_resonant_white_dephasing(self):
        # Act
        rates = self.calculator.rates_single_resonant(self.psd, 7.5 * MHZ, DEFAULT_OMEGA0)

        # Assert
        assert rates.rate_1 == pytest.approx(S0, rel=1e-12)
        assert rates.rate_2 == pytest.approx(S0 / 2, rel=1e-12)
        assert rates.frame is Frame.FRAME1
        assert rates.scenario is Scenario.SINGLE_RESONANT

    def test_ccd_amplitude_white_dephasing(self):
        rates = self.calculator.rates_ccd_amplitude(self.psd, 7.5 * MHZ, 0.3 * MHZ, DEFAULT_OMEGA0)

        assert rates.rate_1 == pytest.approx(S0 / 2, rel=1e-12)
        assert rates.rate_2 == pytest.approx(3 * S0 / 4, rel=1e-12)
        assert rates.t1 == pytest.approx(2 / S0, rel=1e-12)
        assert rates.t2 == pytest.approx(4 / (3 * S0), rel=1e-12)
        assert rates.frame is Frame.FRAME2

    def test_ccd_phase_white_dephasing_matches_amplitude(self):
        rates = self.calculator.rates_ccd_phase(self.psd, 7.5 * MHZ, 0.3 * MHZ, DEFAULT_OMEGA0)

        assert rates.rate_1 == pytest.approx(S0 / 2, rel=1e-12)
        assert rates.rate_2 == pytest.approx(3 * S0 / 4, rel=1e-12)

    def test_transverse_rate_splits_into_pure_dephasing(self):
        rates = self.calculator.rates_ccd_amplitude(self.psd, 7.5 * MHZ, 0.3 * MHZ, DEFAULT_OMEGA0)
        assert 1 / rates.t2 == pytest.approx(1 / (2 * rates.t1) + 1 / rates.t2_pure)

    def test_no_noise_gives_infinite_times(self):
        rates = self.calculator.rates_single_resonant(NoisePSDSet(), 7.5 * MHZ, DEFAULT_OMEGA0)
        assert rates.rate_1 == 0.0
        assert rates.t1 == float("inf")

    def test_dispatch_by_scenario(self):
        direct = self.calculator.rates_ccd_phase(self.psd, 7.5 * MHZ, 0.3 * MHZ, DEFAULT_OMEGA0)
        routed = self.calculator.rates(Scenario.CCD_PHASE, self.psd, 7.5 * MHZ, DEFAULT_OMEGA0, eps_m=0.3 * MHZ)
        assert routed == direct


class TestDetunedDrive:

    def setup_method(self):
        self.logger = MagicMock()
        self.calculator = RelaxationRateCalculator(self.logger)

    @pytest.mark.parametrize("variant", [RateVariant.EXACT, RateVariant.APPROXIMATED])
    def test_far_detuned_limit_recovers_carrier_noise(self, variant):
        # Arrange: with δ ≫ Ω the effective field lies along z.
        Omega = 1 * MHZ
        psd = NoisePSDSet(S_x=White(S0))

        # Act
        rates = self.calculator.rates_single_detuned(psd, Omega, 100 * Omega, DEFAULT_OMEGA0, variant)

        # Assert
        assert rates.rate_1 == pytest.approx(psd.S_x(DEFAULT_OMEGA0), rel=0.02)

    def test_zero_detuning_matches_resonant(self):
        psd = NoisePSDSet(S_z=Lorentzian.from_sigma(0.1 * MHZ, 2e-6), S_Omega=White(50.0))

        detuned = self.calculator.rates_single_detuned(psd, 5 * MHZ, 0.0, DEFAULT_OMEGA0)
        resonant = self.calculator.rates_single_resonant(psd, 5 * MHZ, DEFAULT_OMEGA0)

        assert detuned.rate_1 == pytest.approx(resonant.rate_1)
        assert detuned.rate_2 == pytest.approx(resonant.rate_2)

    def test_default_uses_closed_form_carrier_coefficient(self):
        # Arrange: δ = Ω gives across = along = ½.
        psd = NoisePSDSet(S_x=White(100.0))
        Omega = 5 * MHZ

        # Act
        rates = self.calculator.rates_single_detuned(psd, Omega, Omega, DEFAULT_OMEGA0)

        # Assert
        assert rates.rate_1 == pytest.approx(75.0)
        assert rates.rate_2 == pytest.approx(125.0)
        assert rates.variant is RateVariant.EXACT

    def test_structural_variant_projects_onto_tilted_axes(self):
        psd = NoisePSDSet(S_x=White(100.0))
        Omega = 5 * MHZ

        rates = self.calculator.rates_single_detuned(psd, Omega, Omega, DEFAULT_OMEGA0, RateVariant.STRUCTURAL)

        assert rates.rate_1 == pytest.approx(75.0)
        assert rates.rate_2 == pytest.approx(62.5)

    def test_dispatch_defaults_to_closed_form(self):
        psd = NoisePSDSet(S_x=White(100.0))

        rates = self.calculator.rates(Scenario.SINGLE_DETUNED, psd, 5 * MHZ, DEFAULT_OMEGA0, delta=5 * MHZ)

        assert rates.rate_2 == pytest.approx(125.0)

    def test_requires_a_drive(self):
        with pytest.raises(InvalidConfigError, match="'Omega'"):
            self.calculator.rates_single_detuned(NoisePSDSet(), 0.0, 1 * MHZ, DEFAULT_OMEGA0)


class TestCcdSweeps:

    def setup_method(self):
        self.logger = MagicMock()
        self.calculator = RelaxationRateCalculator(self.logger)
        self.Omega = 7.5 * MHZ
        noise = Lorentzian.from_sigma(0.05 * MHZ, 2e-6)
        self.psd = NoisePSDSet(S_z=noise, S_Omega=noise)
        self.noisy_modulation = NoisePSDSet(S_z=noise, S_Omega=noise, S_em=noise)

    def test_t1_rises_plateaus_then_collapses(self):
        # Arrange
        eps_values = np.linspace(0.0, 0.95, 39) * self.Omega

        # Act
        t1 = np.array([r.t1 for r in self.calculator.sweep_eps_m(
            Scenario.CCD_AMPLITUDE, self.psd, self.Omega, eps_values, DEFAULT_OMEGA0)])

        # Assert
        peak = int(np.argmax(t1))
        assert t1[1] > t1[0]
        assert 0 < peak < len(t1) - 1
        assert t1[-1] < 0.5 * t1[peak]

    def test_amplitude_t2_peaks_before_phase_t2(self):
        eps_values = np.linspace(0.02, 0.95, 48) * self.Omega

        amplitude = self.calculator.sweep_eps_m(
            Scenario.CCD_AMPLITUDE, self.noisy_modulation, self.Omega, eps_values, DEFAULT_OMEGA0,
            relative_em_noise=True,
        )
        phase = self.calculator.sweep_eps_m(
            Scenario.CCD_PHASE, self.noisy_modulation, self.Omega, eps_values, DEFAULT_OMEGA0,
            relative_em_noise=True,
        )

        assert np.argmax([r.t2 for r in amplitude]) < np.argmax([r.t2 for r in phase])

    def test_near_resonant_modulation_flagged_invalid(self):
        rates = self.calculator.rates_ccd_amplitude(self.psd, self.Omega, 0.99 * self.Omega, DEFAULT_OMEGA0)
        assert rates.valid is False
        assert "validity range" in self.logger.warning.call_args[0][0]

    def test_simplified_drops_fast_modulation_noise(self):
        psd = NoisePSDSet(S_em=White(S0))

        exact = self.calculator.rates_ccd_amplitude(psd, self.Omega, 0.1 * self.Omega, DEFAULT_OMEGA0)
        simplified = self.calculator.rates_ccd_amplitude(
            psd, self.Omega, 0.1 * self.Omega, DEFAULT_OMEGA0, RateVariant.SIMPLIFIED)

        assert exact.rate_1 == pytest.approx(S0 / 8)
        assert simplified.rate_1 == 0.0

    def test_small_modulation_keeps_field_along_y(self):
        rates = self.calculator.rates_ccd_amplitude(
            self.psd, self.Omega, 0.1 * self.Omega, DEFAULT_OMEGA0, RateVariant.SMALL_MODULATION)
        assert rates.gamma_y == rates.rate_1
        assert rates.variant is RateVariant.SMALL_MODULATION

    def test_phase_beyond_rabi_frequency_rejected(self):
        with pytest.raises(OutOfValidityError, match="eps_m <= Omega"):
            self.calculator.rates_ccd_phase(self.psd, self.Omega, 1.2 * self.Omega, DEFAULT_OMEGA0)

    def test_phase_above_half_rabi_is_invalid(self):
        rates = self.calculator.rates_ccd_phase(NoisePSDSet(S_z=White(S0)), self.Omega, 0.6 * self.Omega,
                                                DEFAULT_OMEGA0)
        assert rates.valid is False
        assert "first-order expansion invalid" in self.logger.warning.call_args[0][0]

    def test_negative_modulation_rejected(self):
        with pytest.raises(InvalidConfigError, match="'eps_m'"):
            self.calculator.rates_ccd_amplitude(self.psd, self.Omega, -1.0, DEFAULT_OMEGA0)

    def test_eps_sweep_needs_ccd_scenario(self):
        with pytest.raises(InvalidConfigError, match="CCD scenario"):
            self.calculator.sweep_eps_m(Scenario.SINGLE_RESONANT, self.psd, self.Omega, [1.0], DEFAULT_OMEGA0)

    def test_power_sweep_needs_rho_for_ccd(self):
        with pytest.raises(InvalidConfigError, match="'rho'"):
            self.calculator.sweep_Omega(Scenario.CCD_AMPLITUDE, self.psd, [self.Omega], DEFAULT_OMEGA0)

    def test_power_sweep_scales_modulation(self):
        values = [5 * MHZ, 10 * MHZ]

        swept = self.calculator.sweep_Omega(Scenario.CCD_AMPLITUDE, self.psd, values, DEFAULT_OMEGA0, rho=0.1)

        expected = self.calculator.rates_ccd_amplitude(self.psd, 10 * MHZ, 1 * MHZ, DEFAULT_OMEGA0)
        assert swept[1].rate_1 == pytest.approx(expected.rate_1)
        assert len(swept) == 2


class TestFramePSDs:

    def test_first_frame_field_along_x(self):
        frame = RelaxationRateCalculator.frame1_psds(NoisePSDSet(S_z=White(S0)), 5 * MHZ, DEFAULT_OMEGA0)
        assert frame.field_axis is BlochAxis.X
        assert frame.gammas() == pytest.approx((S0, S0, 0.0))


class TestSpinlockInversion:

    def test_subtracts_t1_floor(self):
        assert RelaxationRateCalculator.spinlock_psd_inversion(10.0, 0.1) == pytest.approx(5.0)

    def test_rate_below_floor_is_inconsistent(self):
        with pytest.raises(InconsistentInputError, match="T1 floor"):
            RelaxationRateCalculator.spinlock_psd_inversion(1.0, 0.1)

    def test_t1_must_be_positive(self):
        with pytest.raises(InvalidConfigError, match="'T1'"):
            RelaxationRateCalculator.spinlock_psd_inversion(1.0, 0.0)
