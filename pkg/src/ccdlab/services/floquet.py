"""Floquet analysis of the periodic first-frame Hamiltonian.

Quasi-energies live in the zone (-ω_m/2, ω_m/2]. The gap is the distance of
the two quasi-energies on the circle of circumference ω_m, so it lies in
[0, ω_m/2]; the "+" mode is the one that sits ``gap`` ahead of the other
going upward around the circle (λ+ - λ- ≡ gap mod ω_m). At second-frame
resonance this makes the gap ε_m and the mode aligned with the second-frame
field the "+" mode.
"""
import math
from typing import List, Tuple

import numpy as np
from scipy.optimize import minimize

from ..drive import DriveConfig, Frame1Hamiltonian, QubitState
from ..enums import BandFamily, Modulation
from ..errors import InvalidConfigError, NumericError, UnsupportedRegimeError
from ..interfaces import ILogger
from ..schemas import BandComponent, BandSpectrum, FloquetData, TimeGrid
from .evolution import EvolutionService
from .logging import timed

_UNITARITY_TOL = 1e-8
_DEGENERACY_TOL = 1e-10
_RESONANCE_TOL = 1e-9
_CONTRACT_FLOOR = 0.05
_REFINE_GRID = 7
_REFINE_SPAN = 0.6


def _wrap_phase(phi: float) -> float:
    """Map to (-π, π]."""
    wrapped = math.pi - ((math.pi - phi) % (2.0 * math.pi))
    return 0.0 if wrapped == 0 else wrapped


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    """Largest-|component| entry made real-positive."""
    lead = v[int(np.argmax(np.abs(v)))]
    return v * (abs(lead) / lead)


class FloquetAnalyzer:
    """Period propagator, quasi-energies, modes and band spectra of a CCD drive."""

    def __init__(self, evolution: EvolutionService, logger: ILogger, n_samples: int = 256, substeps: int = 16):
        if n_samples < 8:
            raise InvalidConfigError(f"'n_samples' must be >= 8, got {n_samples}")
        if substeps < 1:
            raise InvalidConfigError(f"'substeps' must be >= 1, got {substeps}")
        self._evolution = evolution
        self._logger = logger
        self._n_samples = int(n_samples)
        self._substeps = int(substeps)

    @property
    def n_samples(self) -> int:
        return self._n_samples

    def _period_propagators(self, cfg: DriveConfig) -> Tuple[np.ndarray, TimeGrid]:
        if cfg.modulation is Modulation.NONE:
            raise InvalidConfigError("Floquet analysis needs a modulated drive (modulation != none)")
        grid = TimeGrid(0.0, cfg.period, self._n_samples + 1)
        generator = Frame1Hamiltonian(cfg)
        m = max(self._substeps, self._evolution.substeps(generator, grid))
        return self._evolution.propagator(generator, grid, substeps=m), grid

    def monodromy(self, cfg: DriveConfig) -> np.ndarray:
        """One-period propagator U(T) of the first-frame Hamiltonian."""
        propagators, _ = self._period_propagators(cfg)
        return propagators[-1]

    @staticmethod
    def _check_unitary(u: np.ndarray) -> None:
        error = float(np.max(np.abs(u.conj().T @ u - np.eye(2))))
        if error > _UNITARITY_TOL:
            raise NumericError(f"monodromy is not unitary (|U†U - 1| = {error:.3e})")

    @classmethod
    def _eigensystem(cls, u: np.ndarray, omega_m: float) -> Tuple[float, float, float, np.ndarray]:
        """(λ+, λ-, gap, eigenvectors as rows [v+, v-])."""
        cls._check_unitary(u)
        period = 2.0 * math.pi / omega_m
        values, vectors = np.linalg.eig(u)
        if abs(values[0] - values[1]) < _DEGENERACY_TOL:
            basis = np.eye(2, dtype=complex)
        else:
            v1 = vectors[:, 0] / np.linalg.norm(vectors[:, 0])
            basis = np.array([v1, np.array([-np.conj(v1[1]), np.conj(v1[0])])])
        basis = np.array([_canonical_phase(v) for v in basis])

        half = 0.5 * omega_m
        lambdas = []
        for v in basis:
            eigenvalue = np.vdot(v, u @ v)
            lam = -float(np.angle(eigenvalue)) / period
            lambdas.append(half - ((half - lam) % omega_m))

        ahead = (lambdas[0] - lambdas[1]) % omega_m
        if ahead <= half:
            return lambdas[0], lambdas[1], ahead, basis
        return lambdas[1], lambdas[0], omega_m - ahead, basis[::-1].copy()

    @classmethod
    def quasienergies(cls, u: np.ndarray, omega_m: float) -> Tuple[float, float, float]:
        """(λ+, λ-, gap) of a monodromy matrix."""
        lambda_plus, lambda_minus, gap, _ = cls._eigensystem(np.asarray(u, dtype=complex), omega_m)
        return lambda_plus, lambda_minus, gap

    def analyze(self, cfg: DriveConfig) -> FloquetData:
        with timed(self._logger, "Floquet decomposition"):
            propagators, grid = self._period_propagators(cfg)
            monodromy = propagators[-1]
            lambda_plus, lambda_minus, gap, basis = self._eigensystem(monodromy, cfg.omega_m)
            times = grid.times[:-1]
            modes = np.empty((2, times.size, 2), dtype=complex)
            for a, lam in enumerate((lambda_plus, lambda_minus)):
                modes[a] = np.exp(1j * lam * times)[:, None] * (propagators[:-1] @ basis[a])
        return FloquetData(
            period=cfg.period, omega_m=cfg.omega_m, monodromy=monodromy,
            lambda_plus=lambda_plus, lambda_minus=lambda_minus, gap=gap,
            sample_times=times, modes=modes,
        )

    @staticmethod
    def mode_decomposition(psi0: QubitState, fd: FloquetData) -> Tuple[complex, complex]:
        """c± = <Φ±(0)|ψ0>."""
        c = np.conj(fd.initial_modes) @ psi0.vector
        return complex(c[0]), complex(c[1])

    @classmethod
    def spectrum_from(cls, fd: FloquetData, psi0: QubitState, n_max: int) -> BandSpectrum:
        n_samples = fd.sample_times.size
        if n_max < 1 or n_max >= n_samples // 2 - 1:
            raise InvalidConfigError(f"'n_max' must be in [1, {n_samples // 2 - 2}], got {n_max}")
        c_plus, c_minus = cls.mode_decomposition(psi0, fd)
        phi_plus, phi_minus = fd.modes[0, :, 0], fd.modes[1, :, 0]

        center = abs(c_plus) ** 2 * np.abs(phi_plus) ** 2 + abs(c_minus) ** 2 * np.abs(phi_minus) ** 2
        b = np.fft.fft(center) / n_samples
        cross = np.fft.fft(c_plus * np.conj(c_minus) * phi_plus * np.conj(phi_minus)) / n_samples

        omega_m, gap = fd.omega_m, fd.gap
        components: List[BandComponent] = [
            BandComponent(BandFamily.CENTER, 0, 0.0, complex(b[0].real, 0.0))
        ]
        components += [BandComponent(BandFamily.CENTER, k, k * omega_m, complex(b[k])) for k in range(1, n_max + 1)]

        # Cross term 2Re(x_k e^{i(kω_m - g')t}) with g' = λ+ - λ- = gap + shift·ω_m.
        shift = round((fd.lambda_plus - fd.lambda_minus - gap) / omega_m)
        for n in range(-n_max, n_max + 1):
            x = complex(cross[(n + shift) % n_samples])
            if n >= 1:
                components.append(BandComponent(BandFamily.LOWER, n, n * omega_m - gap, x))
            else:
                components.append(BandComponent(BandFamily.UPPER, -n, -n * omega_m + gap, x.conjugate()))
        return BandSpectrum(tuple(components))

    def band_spectrum(self, cfg: DriveConfig, psi0: QubitState, n_max: int) -> BandSpectrum:
        return self.spectrum_from(self.analyze(cfg), psi0, n_max)

    def gap_table(self, cfg: DriveConfig, eps_values: List[float]) -> List[FloquetData]:
        return [self.analyze(cfg.replace(eps_m=float(eps))) for eps in eps_values]

    @staticmethod
    def _analytic_phases(psi0: QubitState) -> Tuple[float, float]:
        """Phases aligning the second-frame field (ε_m/2)(cos φm m(φ0) + sin φm ẑ) with ψ0."""
        r = psi0.bloch()
        transverse = math.hypot(r.x, r.y)
        if transverse < 1e-12:
            return 0.0, math.copysign(0.5 * math.pi, r.z)
        return _wrap_phase(math.atan2(-r.x, r.y)), math.atan2(r.z, transverse)

    def mode_control_phases(self, psi0: QubitState, cfg: DriveConfig, refine: bool = False) -> Tuple[float, float]:
        """(φ0, φm) that make ψ0 a single Floquet mode at second-frame resonance.

        The analytic second-RWA solution is kept when it satisfies
        |c-| <= max(0.05, 2ε_m/Ω); otherwise (or with ``refine``) |c-| is
        minimized over a coarse grid followed by Nelder-Mead.
        """
        scale = max(1.0, cfg.Omega)
        if abs(cfg.delta) > _RESONANCE_TOL * scale or abs(cfg.omega_m - cfg.Omega) > _RESONANCE_TOL * scale:
            raise UnsupportedRegimeError("mode control needs delta = 0 and omega_m = Omega")
        if cfg.modulation is Modulation.NONE or cfg.eps_m <= 0:
            raise UnsupportedRegimeError("mode control needs an active modulation with eps_m > 0")

        phi0, phi_m = self._analytic_phases(psi0)
        bound = max(_CONTRACT_FLOOR, 2.0 * cfg.eps_m / cfg.Omega)

        def residual(phases: np.ndarray) -> float:
            fd = self.analyze(cfg.with_phases(float(phases[0]), float(phases[1])))
            return abs(self.mode_decomposition(psi0, fd)[1]) ** 2

        leak = math.sqrt(residual(np.array([phi0, phi_m])))
        if leak <= bound and not refine:
            return phi0, phi_m

        self._logger.info(f"Refining mode-control phases (analytic |c-| = {leak:.3e}, bound {bound:.3e})")
        offsets = np.linspace(-_REFINE_SPAN, _REFINE_SPAN, _REFINE_GRID)
        candidates = [np.array([phi0 + a, phi_m + b]) for a in offsets for b in offsets]
        start = min(candidates, key=residual)
        result = minimize(residual, start, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-12})
        best = result.x if result.fun <= residual(start) else start
        refined_leak = math.sqrt(min(result.fun, residual(start)))
        if refined_leak > bound:
            self._logger.warning(f"Mode-control contract not met after refinement (|c-| = {refined_leak:.3e})")
        return _wrap_phase(float(best[0])), _wrap_phase(float(best[1]))
