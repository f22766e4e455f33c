"""Deterministic Schrödinger propagation of a single qubit.

Fixed-step fourth-order Magnus integrator with two Gauss points per step. For
H = h(t)·σ the step propagator is exp(-iθ·σ) with

    θ = (dt/2)(h1 + h2) + (√3/6)·dt²·(h2 × h1)

which is an exact SU(2) element, so the norm is conserved to rounding. Any
identity part of the Hamiltonian is a global phase and never enters.
"""
import math
from typing import Optional, Sequence, Union

import numpy as np

from ..drive import DriveConfig, Frame1Hamiltonian, LabHamiltonian, QubitState, bloch_components, frame_angle
from ..enums import BlochAxis, Frame
from ..errors import InvalidConfigError, NumericError
from ..interfaces import IGenerator, ILogger
from ..schemas import TimeGrid, Trajectory
from .logging import timed

_SQRT3_6 = math.sqrt(3.0) / 6.0
_GAUSS_LO = 0.5 - _SQRT3_6
_GAUSS_HI = 0.5 + _SQRT3_6
_DEFAULT_STEPS_PER_CYCLE = 200
_MIN_STEPS_PER_CYCLE = 50
# Batches up to this size run through the pure-Python scalar loop.
_SCALAR_BATCH = 4

Readout = Union[BlochAxis, Sequence[float], np.ndarray]


def readout_vector(readout: Readout) -> np.ndarray:
    if isinstance(readout, BlochAxis):
        return readout.vector
    n = np.asarray(readout, dtype=float).reshape(3)
    norm = float(np.linalg.norm(n))
    if norm == 0 or not math.isfinite(norm):
        raise InvalidConfigError("readout axis must be a finite nonzero 3-vector")
    return n / norm


class EvolutionService:
    """Propagates states and propagators; transforms trajectories between frames."""

    def __init__(self, logger: ILogger, steps_per_cycle: int = _DEFAULT_STEPS_PER_CYCLE):
        if steps_per_cycle < _MIN_STEPS_PER_CYCLE:
            raise InvalidConfigError(
                f"'steps_per_cycle' must be >= {_MIN_STEPS_PER_CYCLE}, got {steps_per_cycle}"
            )
        self._logger = logger
        self._steps_per_cycle = int(steps_per_cycle)

    @property
    def steps_per_cycle(self) -> int:
        return self._steps_per_cycle

    def generator(self, cfg: DriveConfig, frame: Frame = Frame.FRAME1, allow_lab: bool = False) -> IGenerator:
        """Generator of ``cfg`` in the frame it is integrated in (Frame1 or Lab)."""
        if frame is Frame.FRAME1:
            return Frame1Hamiltonian(cfg)
        if frame is Frame.LAB:
            if not allow_lab:
                raise InvalidConfigError("lab-frame propagation must be enabled explicitly (allow_lab)")
            self._logger.warning(
                "Lab-frame propagation resolves the carrier at "
                f"{cfg.omega / (2 * math.pi) / 1e9:.3f} GHz; expect long run times"
            )
            return LabHamiltonian(cfg)
        raise InvalidConfigError("integrate in Frame1 or Lab and transform with to_frame")

    def substeps(self, generator: IGenerator, grid: TimeGrid) -> int:
        """Integrator steps per grid interval so that dt <= 1/(steps_per_cycle·f_max)."""
        return self.substeps_for(generator.max_frequency(), grid)

    def substeps_for(self, f_max: float, grid: TimeGrid) -> int:
        if not math.isfinite(f_max):
            raise NumericError(f"generator reports a non-finite max frequency: {f_max}")
        if f_max <= 0:
            return 1
        dt_max = 2.0 * math.pi / (self._steps_per_cycle * f_max)
        return max(1, math.ceil(grid.dt / dt_max * (1.0 - 1e-12)))

    def propagate(self, generator: IGenerator, psi0: QubitState, grid: TimeGrid,
                  frame: Frame = Frame.FRAME1) -> Trajectory:
        states = self.propagate_states(generator, psi0.vector[None, :], grid)
        return Trajectory(grid=grid, states=states[:, 0, :], frame=frame)

    def propagator(self, generator: IGenerator, grid: TimeGrid, substeps: Optional[int] = None) -> np.ndarray:
        """U(t_k) for every grid point, shape (n_points, 2, 2)."""
        basis = np.eye(2, dtype=complex)
        columns = self.propagate_states(generator, basis, grid, substeps=substeps)
        # columns[k, j] = U(t_k)|j>
        return np.transpose(columns, (0, 2, 1))

    def propagate_states(
        self,
        generator: IGenerator,
        psi0: np.ndarray,
        grid: TimeGrid,
        substeps: Optional[int] = None,
    ) -> np.ndarray:
        """Evolve a batch of states (batch, 2); returns (n_points, batch, 2).

        A batched generator returns components of shape (n_steps, batch, 3),
        one Hamiltonian per batch member.
        """
        psi0 = np.asarray(psi0, dtype=complex)
        if psi0.ndim != 2 or psi0.shape[1] != 2:
            raise InvalidConfigError(f"initial states must have shape (batch, 2), got {psi0.shape}")
        m = self.substeps(generator, grid) if substeps is None else int(substeps)
        if m < 1:
            raise InvalidConfigError(f"'substeps' must be >= 1, got {m}")

        h = grid.dt / m
        n_steps = (grid.n_points - 1) * m
        starts = grid.t_start + h * np.arange(n_steps)
        with timed(self._logger, f"propagation of {n_steps} steps x {psi0.shape[0]} states"):
            h1 = generator.pauli_components(starts + _GAUSS_LO * h)
            h2 = generator.pauli_components(starts + _GAUSS_HI * h)
            if not (np.all(np.isfinite(h1)) and np.all(np.isfinite(h2))):
                raise NumericError("Hamiltonian has non-finite entries on the integration grid")
            u = self._step_unitaries(h1, h2, h)
            if psi0.shape[0] <= _SCALAR_BATCH:
                return self._run_scalar(u, psi0, grid.n_points, m)
            return self._run_batch(u, psi0, grid.n_points, m)

    @staticmethod
    def _step_unitaries(h1: np.ndarray, h2: np.ndarray, h: float) -> np.ndarray:
        """Matrix elements (u00, u01, u10, u11) of every step, shape (4, n_steps[, batch])."""
        theta = 0.5 * h * (h1 + h2) + _SQRT3_6 * h * h * np.cross(h2, h1)
        norm = np.linalg.norm(theta, axis=-1)
        safe = np.where(norm > 0, norm, 1.0)
        scale = np.where(norm > 0, np.sin(norm) / safe, 1.0)
        a0 = np.cos(norm)
        ax, ay, az = (theta[..., i] * scale for i in range(3))
        return np.stack([a0 - 1j * az, -ay - 1j * ax, ay - 1j * ax, a0 + 1j * az])

    @staticmethod
    def _run_scalar(u: np.ndarray, psi0: np.ndarray, n_points: int, m: int) -> np.ndarray:
        batch = psi0.shape[0]
        out = np.empty((n_points, batch, 2), dtype=complex)
        out[0] = psi0
        per_member = u.ndim == 3
        for b in range(batch):
            rows = u[:, :, b] if per_member else u
            u00, u01, u10, u11 = (r.tolist() for r in rows)
            p0, p1 = complex(psi0[b, 0]), complex(psi0[b, 1])
            k = 0
            for i in range(1, n_points):
                for _ in range(m):
                    p0, p1 = u00[k] * p0 + u01[k] * p1, u10[k] * p0 + u11[k] * p1
                    k += 1
                out[i, b, 0] = p0
                out[i, b, 1] = p1
        return out

    @staticmethod
    def _run_batch(u: np.ndarray, psi0: np.ndarray, n_points: int, m: int) -> np.ndarray:
        out = np.empty((n_points, psi0.shape[0], 2), dtype=complex)
        out[0] = psi0
        p0, p1 = psi0[:, 0].copy(), psi0[:, 1].copy()
        u00, u01, u10, u11 = u
        k = 0
        for i in range(1, n_points):
            for _ in range(m):
                p0, p1 = u00[k] * p0 + u01[k] * p1, u10[k] * p0 + u11[k] * p1
                k += 1
            out[i, :, 0] = p0
            out[i, :, 1] = p1
        return out

    @staticmethod
    def population0(traj: Trajectory) -> np.ndarray:
        """P|0>(t) = |a0|² per grid point."""
        return np.abs(traj.states[:, 0]) ** 2

    @staticmethod
    def readout(traj: Trajectory, axis: Readout = BlochAxis.Z) -> np.ndarray:
        """Projection probability onto +n: (1 + n·r)/2."""
        return 0.5 * (1.0 + bloch_components(traj.states) @ readout_vector(axis))

    @classmethod
    def frame_unitaries(cls, source: Frame, target: Frame, cfg: DriveConfig, times: np.ndarray) -> np.ndarray:
        """V(t) with ψ_target = V(t) ψ_source, shape (n, 2, 2)."""
        if source is target:
            raise InvalidConfigError(f"source and target frames are both {source.value}")
        rank = {Frame.LAB: 0, Frame.FRAME1: 1, Frame.FRAME2: 2}
        lo, hi = sorted((source, target), key=rank.__getitem__)
        times = np.asarray(times, dtype=float)
        up = np.broadcast_to(np.eye(2, dtype=complex), times.shape + (2, 2)).copy()
        if lo is Frame.LAB:
            up = cls._lab_to_frame1(cfg, times)
        if hi is Frame.FRAME2:
            up = cls._frame1_to_frame2(cfg, times) @ up
        return up if rank[target] > rank[source] else np.conj(np.swapaxes(up, -1, -2))

    @staticmethod
    def _lab_to_frame1(cfg: DriveConfig, times: np.ndarray) -> np.ndarray:
        """exp(+iΦ(t)σz/2); not the identity at t = 0 for phase modulation with cos φm ≠ 0."""
        half = 0.5 * np.asarray(frame_angle(cfg, times))
        v = np.zeros(times.shape + (2, 2), dtype=complex)
        v[..., 0, 0] = np.exp(1j * half)
        v[..., 1, 1] = np.exp(-1j * half)
        return v

    @staticmethod
    def _frame1_to_frame2(cfg: DriveConfig, times: np.ndarray) -> np.ndarray:
        """exp(+i(ω_m t/2) n(φ0)·σ), a rotation about the first-frame drive axis."""
        if cfg.omega_m <= 0:
            raise InvalidConfigError("the second rotating frame needs 'omega_m' > 0")
        half = 0.5 * cfg.omega_m * times
        nx, ny, _ = cfg.drive_axis
        c, s = np.cos(half), np.sin(half)
        v = np.zeros(times.shape + (2, 2), dtype=complex)
        v[..., 0, 0] = c
        v[..., 1, 1] = c
        v[..., 0, 1] = 1j * s * (nx - 1j * ny)
        v[..., 1, 0] = 1j * s * (nx + 1j * ny)
        return v

    def to_frame(self, traj: Trajectory, target: Frame, cfg: DriveConfig) -> Trajectory:
        v = self.frame_unitaries(traj.frame, target, cfg, traj.times)
        states = np.einsum("nij,nj->ni", v, traj.states)
        return Trajectory(grid=traj.grid, states=states, frame=target)
