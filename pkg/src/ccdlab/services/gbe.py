"""Analytic relaxation rates from lab-frame noise spectra.

Each scenario maps the lab PSDs (S_x, S_z, S_Ω, S_εm) into the working frame
and applies the same three-axis structure. With the static field along axis
L at splitting ω and transverse axes T, T':

    Γ_L = S_T(ω) + S_T'(ω)          (longitudinal, 1/T1)
    Γ_T = S_L(0) + S_T'(ω)
    1/T2 = (Γ_T + Γ_T') / 2

Static (quasi-static Gaussian) spectrum members contribute nothing away from
zero frequency and raise UnsupportedSpectrumError when evaluated at ν = 0; use
the ensemble module for static inhomogeneity.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from ..enums import BlochAxis, Frame, RateVariant, Scenario
from ..errors import InconsistentInputError, InvalidConfigError, OutOfValidityError
from ..interfaces import ILogger, ISpectralFunction
from ..schemas import DecayRates
from ..spectra import NoisePSDSet, TransformedSpectrum, White

_Terms = List[Tuple[float, float, ISpectralFunction]]

_PHASE_WARN_RATIO = 0.2
_PHASE_VALID_RATIO = 0.5
_LORENTZIAN_MARGIN = 5.0
_EXACT_ARGUMENTS = (RateVariant.EXACT, RateVariant.STRUCTURAL)


@dataclass(frozen=True)
class FramePSDs:
    """Noise spectra along the three axes of a working frame."""

    S_x: ISpectralFunction
    S_y: ISpectralFunction
    S_z: ISpectralFunction
    field_axis: BlochAxis
    splitting: float
    frame: Frame

    def _along(self, axis: BlochAxis) -> ISpectralFunction:
        return {BlochAxis.X: self.S_x, BlochAxis.Y: self.S_y, BlochAxis.Z: self.S_z}[axis]

    def gammas(self) -> Tuple[float, float, float]:
        """(Γx, Γy, Γz)."""
        out = []
        for axis in (BlochAxis.X, BlochAxis.Y, BlochAxis.Z):
            others = [a for a in (BlochAxis.X, BlochAxis.Y, BlochAxis.Z) if a is not axis]
            if axis is self.field_axis:
                out.append(sum(self._along(a)(self.splitting) for a in others))
            else:
                transverse = next(a for a in others if a is not self.field_axis)
                out.append(self._along(self.field_axis)(0.0) + self._along(transverse)(self.splitting))
        return out[0], out[1], out[2]

    def decay_rates(self, scenario: Scenario, variant: RateVariant, valid: bool = True) -> DecayRates:
        gammas = self.gammas()
        index = {BlochAxis.X: 0, BlochAxis.Y: 1, BlochAxis.Z: 2}[self.field_axis]
        transverse = [g for i, g in enumerate(gammas) if i != index]
        return DecayRates(
            gamma_x=gammas[0], gamma_y=gammas[1], gamma_z=gammas[2],
            rate_1=gammas[index], rate_2=0.5 * sum(transverse),
            frame=self.frame, scenario=scenario, variant=variant, valid=valid,
        )


def _pair(weight: float, shift: float, base: ISpectralFunction) -> _Terms:
    """weight·[base(ν + shift) + base(ν - shift)]."""
    return [(weight, shift, base), (weight, -shift, base)]


def _scaled(terms: _Terms, factor: float) -> _Terms:
    return [(w * factor, s, base) for w, s, base in terms]


def _carrier(psd: NoisePSDSet, weight: float, shifts: Sequence[float], omega0: float, approximate: bool) -> _Terms:
    """weight·Σ S_x(ν ± ω0 + shift); collapsed to S_x(ω0) when approximating."""
    if approximate:
        return [(2.0 * weight * len(shifts), 0.0, White(psd.S_x(omega0)))]
    terms: _Terms = []
    for shift in shifts:
        terms += [(weight, omega0 + shift, psd.S_x), (weight, -omega0 + shift, psd.S_x)]
    return terms


class RelaxationRateCalculator:
    """Decay rates for the single-drive and CCD scenarios."""

    def __init__(self, logger: ILogger):
        self._logger = logger

    @staticmethod
    def frame1_psds(psd: NoisePSDSet, Omega: float, omega0: float, approximate: bool = False) -> FramePSDs:
        """First-frame spectra; the drive field is along x with splitting Ω."""
        return FramePSDs(
            S_x=TransformedSpectrum(tuple([(0.25, 0.0, psd.S_Omega)] + _carrier(psd, 0.25, [0.0], omega0, approximate))),
            S_y=TransformedSpectrum(tuple(_carrier(psd, 0.25, [0.0], omega0, approximate))),
            S_z=TransformedSpectrum(((1.0, 0.0, psd.S_z),)),
            field_axis=BlochAxis.X, splitting=Omega, frame=Frame.FRAME1,
        )

    @classmethod
    def detuned_psds(cls, psd: NoisePSDSet, Omega: float, delta: float, omega0: float,
                     approximate: bool = False) -> FramePSDs:
        """First-frame spectra in axes rotated so x' lies along (Ω, 0, -δ)/Ω_R."""
        rabi = math.hypot(Omega, delta)
        if rabi <= 0:
            raise InvalidConfigError("generalized Rabi frequency sqrt(Omega^2 + delta^2) must be > 0")
        base = cls.frame1_psds(psd, Omega, omega0, approximate)
        along, across = (Omega / rabi) ** 2, (delta / rabi) ** 2
        x_terms = list(base.S_x.terms)  # type: ignore[attr-defined]
        z_terms = list(base.S_z.terms)  # type: ignore[attr-defined]
        return FramePSDs(
            S_x=TransformedSpectrum(tuple(_scaled(x_terms, along) + _scaled(z_terms, across))),
            S_y=base.S_y,
            S_z=TransformedSpectrum(tuple(_scaled(x_terms, across) + _scaled(z_terms, along))),
            field_axis=BlochAxis.X, splitting=rabi, frame=Frame.FRAME1,
        )

    @staticmethod
    def ccd_amplitude_psds(psd: NoisePSDSet, Omega: float, eps_m: float, omega0: float,
                           approximate: bool = False, counter_rotating: bool = True) -> FramePSDs:
        """Second-frame spectra at ω = ω0, ω_m = Ω; the static field is along y with splitting ε_m."""
        em_fast: _Terms = _pair(1.0 / 16.0, 2.0 * Omega, psd.S_em) if counter_rotating else []
        x_side = _carrier(psd, 1.0 / 16.0, [Omega, -Omega], omega0, approximate)
        z_side = _pair(0.25, Omega, psd.S_z)
        return FramePSDs(
            S_x=TransformedSpectrum(tuple([(0.25, 0.0, psd.S_Omega)] + _carrier(psd, 0.25, [0.0], omega0, approximate))),
            S_y=TransformedSpectrum(tuple([(0.25, 0.0, psd.S_em)] + em_fast + x_side + z_side)),
            S_z=TransformedSpectrum(tuple(em_fast + x_side + z_side)),
            field_axis=BlochAxis.Y, splitting=eps_m, frame=Frame.FRAME2,
        )

    @staticmethod
    def ccd_phase_psds(psd: NoisePSDSet, Omega: float, eps_m: float, omega0: float) -> FramePSDs:
        """Second-frame spectra of phase-modulated CCD to first order in ε_m/Ω."""
        r2 = (eps_m / Omega) ** 2
        s_x = White(psd.S_x(omega0))
        z_side = _pair(0.25, Omega, psd.S_z)
        return FramePSDs(
            S_x=TransformedSpectrum(((0.25, 0.0, psd.S_Omega), (0.5, 0.0, s_x))),
            S_y=TransformedSpectrum(tuple(z_side + [(0.25 + 0.75 * r2, 0.0, s_x)])),
            S_z=TransformedSpectrum(tuple(z_side + [(0.25 + 1.25 * r2, 0.0, s_x)])),
            field_axis=BlochAxis.Y, splitting=eps_m, frame=Frame.FRAME2,
        )

    @staticmethod
    def _require_positive(name: str, value: float) -> None:
        if not (math.isfinite(value) and value > 0):
            raise InvalidConfigError(f"'{name}' must be finite and > 0, got {value!r}")

    def _ccd_validity(self, psd: NoisePSDSet, Omega: float, eps_m: float) -> bool:
        rates = psd.inverse_correlation_times()
        if rates and abs(Omega - eps_m) < _LORENTZIAN_MARGIN * max(rates):
            self._logger.warning(
                f"eps_m within {_LORENTZIAN_MARGIN:g}/tau_c of Omega; second-frame rates are outside their validity range"
            )
            return False
        return True

    def rates_single_resonant(self, psd: NoisePSDSet, Omega: float, omega0: float,
                              variant: RateVariant = RateVariant.EXACT) -> DecayRates:
        """Spin-locking (1/T1ρ) and Rabi (1/T2ρ) rates under a resonant drive."""
        self._require_positive("Omega", Omega)
        approximate = variant not in _EXACT_ARGUMENTS
        return self.frame1_psds(psd, Omega, omega0, approximate).decay_rates(Scenario.SINGLE_RESONANT, variant)

    def rates_single_detuned(self, psd: NoisePSDSet, Omega: float, delta: float, omega0: float,
                             variant: RateVariant = RateVariant.EXACT) -> DecayRates:
        """Rates about the tilted effective field Ω_R = sqrt(Ω² + δ²).

        By default the rates are the primed-axes closed forms

            1/T1ρ = ½S_x(ω0) + (Ω²/Ω_R²)S_z(Ω_R) + (δ²/Ω_R²)[¼S_Ω(Ω_R) + ½S_x(ω0)]
            1/T2ρ = (δ²/Ω_R²)S_z(0) + (Ω²/4Ω_R²)[S_Ω(0) + 2S_z(Ω_R)]
                    + (δ²/8Ω_R²)S_Ω(Ω_R) + [¾ + δ²/Ω_R²]S_x(ω0)

        for every variant; the carrier noise already enters at S_x(ω0).
        STRUCTURAL instead projects the noise onto the tilted axes with exact
        spectral arguments, which gives the S_x(ω0) coefficient
        ¾ - δ²/(4Ω_R²) in 1/T2ρ away from δ = 0.
        """
        self._require_positive("Omega", Omega)
        frame = self.detuned_psds(psd, Omega, delta, omega0, approximate=variant not in _EXACT_ARGUMENTS)
        structural = frame.decay_rates(Scenario.SINGLE_DETUNED, variant)
        if variant is RateVariant.STRUCTURAL:
            return structural

        rabi2 = Omega * Omega + delta * delta
        along, across = Omega * Omega / rabi2, delta * delta / rabi2
        rabi = math.sqrt(rabi2)
        s_x = psd.S_x(omega0)
        s_z_rabi = psd.S_z(rabi)
        s_omega_rabi = psd.S_Omega(rabi)
        s_z_zero = psd.S_z(0.0) if across else 0.0
        s_omega_zero = psd.S_Omega(0.0) if along else 0.0
        rate_1 = 0.5 * s_x + along * s_z_rabi + across * (0.25 * s_omega_rabi + 0.5 * s_x)
        rate_2 = (across * s_z_zero + 0.25 * along * (s_omega_zero + 2.0 * s_z_rabi)
                  + 0.125 * across * s_omega_rabi + (0.75 + across) * s_x)
        return DecayRates(
            gamma_x=structural.gamma_x, gamma_y=structural.gamma_y, gamma_z=structural.gamma_z,
            rate_1=rate_1, rate_2=rate_2, frame=Frame.FRAME1, scenario=Scenario.SINGLE_DETUNED,
            variant=variant,
        )

    def rates_ccd_amplitude(self, psd: NoisePSDSet, Omega: float, eps_m: float, omega0: float,
                            variant: RateVariant = RateVariant.EXACT) -> DecayRates:
        """1/T1ρρ and 1/T2ρρ of amplitude-modulated CCD at ω = ω0, ω_m = Ω, φ0 = φm = 0."""
        self._require_positive("Omega", Omega)
        if eps_m < 0:
            raise InvalidConfigError(f"'eps_m' must be >= 0, got {eps_m}")
        valid = self._ccd_validity(psd, Omega, eps_m)
        if variant is RateVariant.SMALL_MODULATION:
            return self._amplitude_small_modulation(psd, Omega, eps_m, omega0, valid)
        frame = self.ccd_amplitude_psds(
            psd, Omega, eps_m, omega0,
            approximate=variant not in _EXACT_ARGUMENTS,
            counter_rotating=variant is not RateVariant.SIMPLIFIED,
        )
        return frame.decay_rates(Scenario.CCD_AMPLITUDE, variant, valid)

    @staticmethod
    def _amplitude_small_modulation(psd: NoisePSDSet, Omega: float, eps_m: float, omega0: float,
                                    valid: bool) -> DecayRates:
        s_x = psd.S_x(omega0)
        s_omega = psd.S_Omega(eps_m)
        s_em_fast = psd.S_em(2.0 * Omega)
        s_z = psd.S_z(Omega)
        rate_1 = 0.25 * s_omega + 0.75 * s_x + 0.125 * s_em_fast + 0.5 * s_z
        rate_2 = 0.25 * psd.S_em(0.0) + 0.125 * s_omega + 0.1875 * s_em_fast + 0.75 * s_z + 0.625 * s_x
        along_field = rate_2 - 0.5 * rate_1
        s_x_frame = 0.25 * s_omega + 0.5 * s_x
        return DecayRates(
            gamma_x=along_field + rate_1 - s_x_frame, gamma_y=rate_1, gamma_z=along_field + s_x_frame,
            rate_1=rate_1, rate_2=rate_2, frame=Frame.FRAME2, scenario=Scenario.CCD_AMPLITUDE,
            variant=RateVariant.SMALL_MODULATION, valid=valid,
        )

    def rates_ccd_phase(self, psd: NoisePSDSet, Omega: float, eps_m: float, omega0: float,
                        variant: RateVariant = RateVariant.EXACT) -> DecayRates:
        """1/T1ρρ and 1/T2ρρ of phase-modulated CCD, first order in ε_m/Ω.

        Modulation-amplitude noise does not enter. Carrier-noise terms are
        always evaluated at S_x(ω0).
        """
        self._require_positive("Omega", Omega)
        if eps_m < 0:
            raise InvalidConfigError(f"'eps_m' must be >= 0, got {eps_m}")
        ratio = eps_m / Omega
        if ratio > 1.0:
            raise OutOfValidityError(f"phase-modulated rates need eps_m <= Omega, got eps_m/Omega = {ratio:.3f}")
        valid = self._ccd_validity(psd, Omega, eps_m)
        if ratio > _PHASE_VALID_RATIO:
            self._logger.warning(f"eps_m/Omega = {ratio:.3f} exceeds {_PHASE_VALID_RATIO}; first-order expansion invalid")
            valid = False
        elif ratio > _PHASE_WARN_RATIO:
            self._logger.warning(f"eps_m/Omega = {ratio:.3f} exceeds {_PHASE_WARN_RATIO}; first-order expansion degrading")

        if variant is RateVariant.SMALL_MODULATION:
            s_x = psd.S_x(omega0)
            s_omega = psd.S_Omega(eps_m)
            s_z = psd.S_z(Omega)
            rate_1 = 0.25 * s_omega + 0.75 * s_x + 0.5 * s_z
            rate_2 = 0.125 * s_omega + 0.75 * s_z + 0.625 * s_x
            along_field = rate_2 - 0.5 * rate_1
            s_x_frame = 0.25 * s_omega + 0.5 * s_x
            return DecayRates(
                gamma_x=along_field + rate_1 - s_x_frame, gamma_y=rate_1, gamma_z=along_field + s_x_frame,
                rate_1=rate_1, rate_2=rate_2, frame=Frame.FRAME2, scenario=Scenario.CCD_PHASE,
                variant=variant, valid=valid,
            )
        return self.ccd_phase_psds(psd, Omega, eps_m, omega0).decay_rates(Scenario.CCD_PHASE, variant, valid)

    def rates(self, scenario: Scenario, psd: NoisePSDSet, Omega: float, omega0: float,
              eps_m: float = 0.0, delta: float = 0.0,
              variant: RateVariant = RateVariant.EXACT) -> DecayRates:
        if scenario is Scenario.SINGLE_RESONANT:
            return self.rates_single_resonant(psd, Omega, omega0, variant)
        if scenario is Scenario.SINGLE_DETUNED:
            return self.rates_single_detuned(psd, Omega, delta, omega0, variant)
        if scenario is Scenario.CCD_AMPLITUDE:
            return self.rates_ccd_amplitude(psd, Omega, eps_m, omega0, variant)
        return self.rates_ccd_phase(psd, Omega, eps_m, omega0, variant)

    def sweep_eps_m(self, scenario: Scenario, psd: NoisePSDSet, Omega: float, eps_values: Sequence[float],
                    omega0: float, variant: RateVariant = RateVariant.EXACT,
                    relative_em_noise: bool = False) -> List[DecayRates]:
        """Rates along an ε_m sweep; ``relative_em_noise`` scales S_εm by (ε_m/Ω)² per point."""
        if scenario not in (Scenario.CCD_AMPLITUDE, Scenario.CCD_PHASE):
            raise InvalidConfigError(f"eps_m sweeps need a CCD scenario, got {scenario.value}")
        out = []
        for eps in eps_values:
            point_psd = psd.with_relative_modulation_noise(eps, Omega) if relative_em_noise else psd
            out.append(self.rates(scenario, point_psd, Omega, omega0, eps_m=float(eps), variant=variant))
        return out

    def sweep_Omega(self, scenario: Scenario, psd: NoisePSDSet, Omega_values: Sequence[float], omega0: float,
                    delta: float = 0.0, rho: Optional[float] = None,
                    variant: RateVariant = RateVariant.EXACT) -> List[DecayRates]:
        """Rates along a drive-power sweep; CCD scenarios use ε_m = ρ·Ω."""
        ccd = scenario in (Scenario.CCD_AMPLITUDE, Scenario.CCD_PHASE)
        if ccd and rho is None:
            raise InvalidConfigError("CCD power sweeps need 'rho' (eps_m = rho * Omega)")
        return [
            self.rates(scenario, psd, float(Omega), omega0, eps_m=(rho or 0.0) * Omega, delta=delta, variant=variant)
            for Omega in Omega_values
        ]

    @staticmethod
    def spinlock_psd_inversion(rate: float, T1: float) -> float:
        """S_z(Ω) from a spin-locking rate: 1/T1ρ - 1/(2T1)."""
        if not (math.isfinite(T1) and T1 > 0):
            raise InvalidConfigError(f"'T1' must be finite and > 0, got {T1!r}")
        floor = 0.5 / T1
        if rate < floor:
            raise InconsistentInputError(
                f"spin-locking rate {rate:.6g}/s is below the T1 floor 1/(2·T1) = {floor:.6g}/s"
            )
        return rate - floor
