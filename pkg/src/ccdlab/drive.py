"""Drive configuration, qubit states and the drive Hamiltonians in each frame.

Every physical symbol of the toolkit lives here. Angular frequencies (rad/s)
and seconds throughout; the CLI converts from MHz / μs before anything in this
module is constructed.

First-rotating-frame convention: the carrier phase φ0 rotates the transverse
field axes about z. The drive points along n(φ0) = (cos φ0, sin φ0, 0) and the
amplitude modulation along m(φ0) = (-sin φ0, cos φ0, 0), so φ0 = 0 reproduces
(Ω/2)σx + ε_m cos(ω_m t + φm)σy.
"""
import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from .enums import Modulation
from .errors import InvalidConfigError
from .interfaces import IGenerator

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

TWO_PI = 2.0 * math.pi
# Zero-field splitting of the NV ground state used when only frame-1 physics matters.
DEFAULT_OMEGA0 = TWO_PI * 2.2072e9

_RWA_RATIO = 0.1
_NORM_TOL = 1e-12
_ZERO_AMPLITUDE = 1e-12

ArrayLike = Union[float, np.ndarray]


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidConfigError(f"'{name}' must be finite, got {value!r}")


@dataclass(frozen=True)
class DriveConfig:
    """All drive parameters, angular frequencies in rad/s and phases in radians.

    ``delta`` is stored redundantly and must equal ``omega - omega0``. Use
    :meth:`create` (lab parameters) or :meth:`rotating` (detuning first) rather
    than the raw constructor so the two stay consistent.
    """

    omega0: float
    omega: float
    delta: float
    Omega: float
    eps_m: float = 0.0
    omega_m: float = 0.0
    phi0: float = 0.0
    phi_m: float = 0.0
    modulation: Modulation = Modulation.NONE

    def __post_init__(self) -> None:
        _check_finite(
            omega0=self.omega0, omega=self.omega, delta=self.delta, Omega=self.Omega,
            eps_m=self.eps_m, omega_m=self.omega_m, phi0=self.phi0, phi_m=self.phi_m,
        )
        if not isinstance(self.modulation, Modulation):
            raise InvalidConfigError(f"'modulation' must be a Modulation, got {self.modulation!r}")
        if self.omega0 < 0:
            raise InvalidConfigError(f"'omega0' must be >= 0, got {self.omega0}")
        tol = 1e-9 * max(1.0, abs(self.omega), abs(self.omega0))
        if abs(self.delta - (self.omega - self.omega0)) > tol:
            raise InvalidConfigError(
                f"'delta' must equal omega - omega0 ({self.omega - self.omega0}), got {self.delta}"
            )
        if self.Omega < 0:
            raise InvalidConfigError(f"'Omega' must be >= 0, got {self.Omega}")
        if self.eps_m < 0:
            raise InvalidConfigError(f"'eps_m' must be >= 0, got {self.eps_m}")
        if self.omega_m < 0:
            raise InvalidConfigError(f"'omega_m' must be >= 0, got {self.omega_m}")
        if self.modulation is not Modulation.NONE and self.omega_m <= 0:
            raise InvalidConfigError(
                f"'omega_m' must be > 0 for {self.modulation.value} modulation, got {self.omega_m}"
            )
        if self.modulation is Modulation.PHASE and self.Omega == 0:
            raise InvalidConfigError("phase modulation requires 'Omega' > 0 (index 2·eps_m/Omega)")

    @classmethod
    def create(
        cls,
        *,
        omega0: float,
        omega: float,
        Omega: float,
        eps_m: float = 0.0,
        omega_m: float = 0.0,
        phi0: float = 0.0,
        phi_m: float = 0.0,
        modulation: Modulation = Modulation.NONE,
    ) -> "DriveConfig":
        """Build from lab parameters; ``delta`` is derived."""
        return cls(
            omega0=omega0, omega=omega, delta=omega - omega0, Omega=Omega, eps_m=eps_m,
            omega_m=omega_m, phi0=phi0, phi_m=phi_m, modulation=modulation,
        )

    @classmethod
    def rotating(
        cls,
        *,
        Omega: float,
        delta: float = 0.0,
        eps_m: float = 0.0,
        omega_m: Optional[float] = None,
        phi0: float = 0.0,
        phi_m: float = 0.0,
        modulation: Modulation = Modulation.NONE,
        omega0: float = DEFAULT_OMEGA0,
    ) -> "DriveConfig":
        """Build from first-frame parameters; ``omega_m`` defaults to Ω (second-frame resonance)."""
        return cls(
            omega0=omega0, omega=omega0 + delta, delta=delta, Omega=Omega, eps_m=eps_m,
            omega_m=Omega if omega_m is None else omega_m, phi0=phi0, phi_m=phi_m,
            modulation=modulation,
        )

    @classmethod
    def resonant(
        cls,
        *,
        Omega: float,
        eps_m: float = 0.0,
        phi0: float = 0.0,
        phi_m: float = 0.0,
        modulation: Modulation = Modulation.AMPLITUDE,
        omega0: float = DEFAULT_OMEGA0,
    ) -> "DriveConfig":
        """CCD at both resonances: ω = ω0 and ω_m = Ω."""
        return cls.rotating(
            Omega=Omega, eps_m=eps_m, phi0=phi0, phi_m=phi_m, modulation=modulation, omega0=omega0,
        )

    def replace(self, **changes: Any) -> "DriveConfig":
        """Copy with changes, keeping ``delta == omega - omega0``.

        Passing ``delta`` moves the carrier; passing ``omega`` or ``omega0``
        re-derives the detuning.
        """
        if "delta" in changes and "omega" not in changes:
            omega0 = changes.get("omega0", self.omega0)
            changes["omega"] = omega0 + changes["delta"]
        elif "omega" in changes or "omega0" in changes:
            changes["delta"] = changes.get("omega", self.omega) - changes.get("omega0", self.omega0)
        return dataclasses.replace(self, **changes)

    def with_phases(self, phi0: float, phi_m: float) -> "DriveConfig":
        return dataclasses.replace(self, phi0=phi0, phi_m=phi_m)

    @property
    def period(self) -> float:
        """Modulation period 2π/ω_m."""
        if self.omega_m <= 0:
            raise InvalidConfigError("'omega_m' must be > 0 to define a modulation period")
        return TWO_PI / self.omega_m

    @property
    def rabi_generalized(self) -> float:
        """Ω_R = sqrt(Ω² + δ²)."""
        return math.hypot(self.Omega, self.delta)

    @property
    def drive_axis(self) -> np.ndarray:
        return np.array([math.cos(self.phi0), math.sin(self.phi0), 0.0])

    @property
    def modulation_axis(self) -> np.ndarray:
        return np.array([-math.sin(self.phi0), math.cos(self.phi0), 0.0])

    @property
    def effective_eps(self) -> float:
        """ε_m if a modulation is active, else 0."""
        return 0.0 if self.modulation is Modulation.NONE else self.eps_m

    def rwa_flags(self) -> Tuple[bool, bool]:
        """(first RWA ok, second RWA ok): Ω, ε_m ≪ ω0 and ε_m ≪ Ω at ratio 0.1."""
        first = max(self.Omega, self.effective_eps) <= _RWA_RATIO * self.omega0
        second = self.effective_eps <= _RWA_RATIO * self.Omega
        return first, second

    def to_dict(self) -> Dict[str, Any]:
        return {
            "omega0": self.omega0,
            "omega": self.omega,
            "delta": self.delta,
            "Omega": self.Omega,
            "eps_m": self.eps_m,
            "omega_m": self.omega_m,
            "phi0": self.phi0,
            "phi_m": self.phi_m,
            "modulation": self.modulation.value,
        }


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, v: np.ndarray) -> "BlochVector":
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class QubitState:
    """Normalized pure state a0|0> + a1|1> with canonical global phase.

    a0 is made real non-negative when |a0| > 1e-12; otherwise a1 is.
    """

    a0: complex
    a1: complex

    def __post_init__(self) -> None:
        a0, a1 = complex(self.a0), complex(self.a1)
        if not all(math.isfinite(v) for v in (a0.real, a0.imag, a1.real, a1.imag)):
            raise InvalidConfigError("state amplitudes must be finite")
        norm = abs(a0) ** 2 + abs(a1) ** 2
        if abs(norm - 1.0) > _NORM_TOL:
            raise InvalidConfigError(f"state must be normalized, |a0|^2 + |a1|^2 = {norm!r}")
        lead = a0 if abs(a0) > _ZERO_AMPLITUDE else a1
        phase = lead / abs(lead)
        object.__setattr__(self, "a0", a0 / phase)
        object.__setattr__(self, "a1", a1 / phase)

    @classmethod
    def from_vector(cls, v: np.ndarray, normalize: bool = True) -> "QubitState":
        v = np.asarray(v, dtype=complex).reshape(2)
        norm = float(np.linalg.norm(v))
        if normalize:
            if norm == 0.0 or not math.isfinite(norm):
                raise InvalidConfigError("cannot normalize a zero or non-finite state vector")
            v = v / norm
        return cls(complex(v[0]), complex(v[1]))

    @classmethod
    def ground(cls) -> "QubitState":
        return cls(1.0 + 0j, 0j)

    @classmethod
    def excited(cls) -> "QubitState":
        return cls(0j, 1.0 + 0j)

    @classmethod
    def from_bloch_angles(cls, theta: float, phi: float) -> "QubitState":
        """cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>."""
        return cls.from_vector(np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)]))

    @classmethod
    def from_bloch(cls, r: BlochVector) -> "QubitState":
        if r.norm == 0.0:
            raise InvalidConfigError("Bloch vector must be nonzero")
        x, y, z = r.as_array() / r.norm
        return cls.from_bloch_angles(math.acos(max(-1.0, min(1.0, z))), math.atan2(y, x))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a0, self.a1], dtype=complex)

    def bloch(self) -> BlochVector:
        return BlochVector.from_array(bloch_components(self.vector))


def bloch_components(states: np.ndarray) -> np.ndarray:
    """Bloch vectors of state vectors with shape (..., 2) -> (..., 3)."""
    a0, a1 = states[..., 0], states[..., 1]
    cross = np.conj(a0) * a1
    return np.stack(
        [2.0 * cross.real, 2.0 * cross.imag, np.abs(a0) ** 2 - np.abs(a1) ** 2], axis=-1
    )


@dataclass(frozen=True)
class InhomogeneityModel:
    """Static ensemble spread: drive-strength and detuning Gaussians plus hyperfine sublevels."""

    sigma_Omega_rel: float
    sigma_omega: float
    tau0: float
    hyperfine_A: float
    sublevel_populations: Tuple[float, float, float]
    sublevel_offsets: Tuple[float, float, float]

    def __post_init__(self) -> None:
        pops = tuple(float(c) for c in self.sublevel_populations)
        offsets = tuple(float(o) for o in self.sublevel_offsets)
        if len(pops) != 3 or len(offsets) != 3:
            raise InvalidConfigError("exactly three sublevel populations and offsets are required")
        if any(c < 0 for c in pops):
            raise InvalidConfigError(f"'sublevel_populations' must be nonnegative, got {pops}")
        if abs(sum(pops) - 1.0) > 1e-9:
            raise InvalidConfigError(f"'sublevel_populations' must sum to 1, got {sum(pops)!r}")
        if self.sigma_Omega_rel < 0 or self.sigma_omega < 0:
            raise InvalidConfigError("inhomogeneity widths must be >= 0")
        if not self.tau0 > 0:
            raise InvalidConfigError(f"'tau0' must be > 0 or inf, got {self.tau0}")
        object.__setattr__(self, "sublevel_populations", pops)
        object.__setattr__(self, "sublevel_offsets", offsets)

    @classmethod
    def from_hyperfine(
        cls,
        sigma_Omega_rel: float,
        sigma_omega: float,
        tau0: float,
        hyperfine_A: float,
        populations: Tuple[float, float, float],
    ) -> "InhomogeneityModel":
        return cls(
            sigma_Omega_rel=sigma_Omega_rel, sigma_omega=sigma_omega, tau0=tau0,
            hyperfine_A=hyperfine_A, sublevel_populations=populations,
            sublevel_offsets=(-hyperfine_A, 0.0, hyperfine_A),
        )

    @classmethod
    def nv_default(cls) -> "InhomogeneityModel":
        """Measured NV ensemble: 1.6% power spread, 0.32 MHz detuning spread, τ0 = 13 μs, 73% polarization."""
        return cls.from_hyperfine(
            sigma_Omega_rel=0.016,
            sigma_omega=TWO_PI * 0.32e6,
            tau0=13e-6,
            hyperfine_A=TWO_PI * 2.2e6,
            populations=(0.135, 0.73, 0.135),
        )

    @classmethod
    def single(cls, sigma_Omega_rel: float = 0.0, sigma_omega: float = 0.0, tau0: float = math.inf) -> "InhomogeneityModel":
        """One resonant sublevel, no hyperfine structure."""
        return cls(
            sigma_Omega_rel=sigma_Omega_rel, sigma_omega=sigma_omega, tau0=tau0, hyperfine_A=0.0,
            sublevel_populations=(0.0, 1.0, 0.0), sublevel_offsets=(0.0, 0.0, 0.0),
        )


def waveform(cfg: DriveConfig, t: ArrayLike) -> ArrayLike:
    """Lab-frame drive coefficient of σx at time(s) t."""
    t = np.asarray(t, dtype=float)
    carrier = cfg.omega * t + cfg.phi0
    mod = cfg.omega_m * t + cfg.phi_m
    if cfg.modulation is Modulation.AMPLITUDE:
        value = cfg.Omega * np.cos(carrier) - 2.0 * cfg.eps_m * np.sin(carrier) * np.cos(mod)
    elif cfg.modulation is Modulation.PHASE:
        value = cfg.Omega * np.cos(carrier + (2.0 * cfg.eps_m / cfg.Omega) * np.cos(mod))
    else:
        value = cfg.Omega * np.cos(carrier)
    return value if value.ndim else float(value)


def frame_angle(cfg: DriveConfig, t: ArrayLike) -> ArrayLike:
    """Accumulated rotation Φ(t) of the first frame: ωt, plus the phase-modulation index term."""
    t = np.asarray(t, dtype=float)
    angle = cfg.omega * t
    if cfg.modulation is Modulation.PHASE and cfg.eps_m:
        angle = angle + (2.0 * cfg.eps_m / cfg.Omega) * np.cos(cfg.omega_m * t + cfg.phi_m)
    return angle


def frame1_components(
    cfg: DriveConfig,
    t: ArrayLike,
    xi_x: ArrayLike = 0.0,
    xi_z: ArrayLike = 0.0,
    xi_Omega: ArrayLike = 0.0,
    xi_em: ArrayLike = 0.0,
) -> np.ndarray:
    """Pauli coefficients of the first-frame Hamiltonian, noise included.

    Noise enters as ξ_z σz, (Ω + ξ_Ω)/2 on the drive axis, ε_m + ξ_εm in the
    modulation amplitude, and ξ_x with its explicit rotating factors
    ξ_x (cos Φ σx - sin Φ σy). Noise arrays broadcast against ``t``.
    """
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(t.shape, *(np.shape(x) for x in (xi_x, xi_z, xi_Omega, xi_em)))
    c0, s0 = math.cos(cfg.phi0), math.sin(cfg.phi0)

    hz = np.broadcast_to(-0.5 * cfg.delta + np.asarray(xi_z, dtype=float), shape).astype(float)
    drive = 0.5 * (cfg.Omega + np.asarray(xi_Omega, dtype=float))
    hx = np.broadcast_to(drive * c0, shape).astype(float)
    hy = np.broadcast_to(drive * s0, shape).astype(float)

    eps = cfg.eps_m + np.asarray(xi_em, dtype=float)
    mod_phase = cfg.omega_m * t + cfg.phi_m
    if cfg.modulation is Modulation.AMPLITUDE:
        mod = eps * np.cos(mod_phase)
        hx = hx - mod * s0
        hy = hy + mod * c0
    elif cfg.modulation is Modulation.PHASE:
        hz = hz + eps * (cfg.omega_m / cfg.Omega) * np.sin(mod_phase)

    if np.any(np.asarray(xi_x) != 0):
        angle = frame_angle(cfg, t)
        hx = hx + xi_x * np.cos(angle)
        hy = hy - xi_x * np.sin(angle)
    return np.stack(np.broadcast_arrays(hx, hy, hz), axis=-1)


def matrices(components: np.ndarray) -> np.ndarray:
    """h·σ for components of shape (..., 3) -> (..., 2, 2)."""
    return np.einsum("...k,kij->...ij", components, PAULI)


def hamiltonian_frame1(cfg: DriveConfig, t: ArrayLike) -> np.ndarray:
    """First-rotating-frame RWA Hamiltonian (rad/s); shape (2, 2) or (n, 2, 2)."""
    return matrices(frame1_components(cfg, t))


def lab_components(cfg: DriveConfig, t: ArrayLike) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    w = np.asarray(waveform(cfg, t), dtype=float)
    return np.stack([w, np.zeros_like(w), np.full_like(w, 0.5 * cfg.omega0)], axis=-1)


def hamiltonian_lab(cfg: DriveConfig, t: ArrayLike) -> np.ndarray:
    """(ω0/2)σz + waveform(t)·σx."""
    return matrices(lab_components(cfg, t))


class Frame1Hamiltonian(IGenerator):
    """First-frame RWA generator of a drive configuration."""

    def __init__(self, cfg: DriveConfig):
        self._cfg = cfg

    @property
    def config(self) -> DriveConfig:
        return self._cfg

    def pauli_components(self, times: np.ndarray) -> np.ndarray:
        return frame1_components(self._cfg, times)

    def max_frequency(self) -> float:
        cfg = self._cfg
        eps = cfg.effective_eps
        z_max = 0.5 * abs(cfg.delta)
        xy_max = 0.5 * cfg.Omega
        if cfg.modulation is Modulation.AMPLITUDE:
            xy_max += eps
        elif cfg.modulation is Modulation.PHASE:
            z_max += eps * cfg.omega_m / cfg.Omega
        # Splitting is twice the field; the modulation itself oscillates at ω_m.
        return 2.0 * math.hypot(z_max, xy_max) + (cfg.omega_m if eps else 0.0)


class LabHamiltonian(IGenerator):
    """Full lab-frame generator, counter-rotating terms included."""

    def __init__(self, cfg: DriveConfig):
        self._cfg = cfg

    @property
    def config(self) -> DriveConfig:
        return self._cfg

    def pauli_components(self, times: np.ndarray) -> np.ndarray:
        return lab_components(self._cfg, times)

    def max_frequency(self) -> float:
        cfg = self._cfg
        field = cfg.Omega + 2.0 * cfg.effective_eps
        return max(cfg.omega0, cfg.omega) + 2.0 * field + cfg.omega_m


class StaticHamiltonian(IGenerator):
    """Time-independent H = h·σ."""

    def __init__(self, hx: float = 0.0, hy: float = 0.0, hz: float = 0.0):
        self._h = np.array([hx, hy, hz], dtype=float)

    def pauli_components(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return np.broadcast_to(self._h, times.shape + (3,)).copy()

    def max_frequency(self) -> float:
        return 2.0 * float(np.linalg.norm(self._h))


class MatrixGenerator(IGenerator):
    """Adapts any callable t -> 2×2 Hermitian matrix; the identity part is dropped as a global phase."""

    def __init__(self, hamiltonian: Callable[[float], np.ndarray], max_frequency: float):
        if not max_frequency >= 0:
            raise InvalidConfigError(f"'max_frequency' must be >= 0, got {max_frequency}")
        self._hamiltonian = hamiltonian
        self._max_frequency = float(max_frequency)

    def pauli_components(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        flat = np.array([np.asarray(self._hamiltonian(float(t)), dtype=complex) for t in times.ravel()])
        flat = flat.reshape(-1, 2, 2)
        hx = 0.5 * (flat[:, 0, 1] + flat[:, 1, 0]).real
        hy = (0.5 * (flat[:, 1, 0] - flat[:, 0, 1]) / 1j).real
        hz = 0.5 * (flat[:, 0, 0] - flat[:, 1, 1]).real
        return np.stack([hx, hy, hz], axis=-1).reshape(times.shape + (3,))

    def max_frequency(self) -> float:
        return self._max_frequency
