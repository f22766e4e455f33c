"""Fit models, windowed contrast and FFT peak extraction for sampled signals.

Fits run on a rescaled time axis (unit span) so every parameter is O(1) for
the Levenberg-Marquardt solver; results are returned in s and rad/s.
"""
import math
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from lmfit import Parameters, fit_report, minimize
from scipy.signal import find_peaks, get_window, hilbert

from ..enums import FitModelKind
from ..errors import FitFailureError, InvalidConfigError
from ..schemas import FitResult, WindowContrast

_FLAT_PTP = 1e-12
_SAMPLES_PER_PARAM = 8
_NFEV_PER_PARAM = 500
_TOL = 1e-10
_PAD = 4
_PEAK_FLOOR = 1e-9
_ALPHA_MIN = 1e-3
_ALPHA_MAX = 4.0
_TAU_MAX_STEPS = 1e6
# MINPACK "tolerance too small" exits: no further improvement is possible.
_STALLED = (6, 7, 8)


def _wrap(phi: float) -> float:
    wrapped = math.pi - ((math.pi - phi) % (2.0 * math.pi))
    return 0.0 if wrapped == 0 else wrapped


class FitModels:
    """Closed forms of the fit models in physical units."""

    @staticmethod
    def names(kind: FitModelKind, n_components: int = 1) -> List[str]:
        if n_components < 1:
            raise InvalidConfigError(f"'n_components' must be >= 1, got {n_components}")
        if kind is not FitModelKind.DAMPED_COSINE and n_components != 1:
            raise InvalidConfigError(f"{kind.value} has exactly one component, got {n_components}")
        if kind is FitModelKind.EXPONENTIAL:
            return ["c0", "c1", "rate"]
        if kind is FitModelKind.WINDOW_COSINE:
            return ["c0", "c1", "omega1", "phi1"]
        k = range(1, n_components + 1)
        names = ["c0"] + [f"c{i}" for i in k] + [f"tau{i}" for i in k] + [f"omega{i}" for i in k] + [f"phi{i}" for i in k]
        if kind is FitModelKind.STRETCHED_COSINE:
            names.append("alpha")
        return names

    @staticmethod
    def evaluate(kind: FitModelKind, params: Mapping[str, float], t: np.ndarray, n_components: int = 1) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        c0 = params["c0"]
        if kind is FitModelKind.EXPONENTIAL:
            return c0 + params["c1"] * np.exp(-params["rate"] * t)
        if kind is FitModelKind.WINDOW_COSINE:
            return c0 + 0.5 * params["c1"] * np.cos(params["omega1"] * t + params["phi1"])
        if kind is FitModelKind.STRETCHED_COSINE:
            envelope = np.exp(-np.power(np.abs(t) / params["tau1"], params["alpha"]))
            return c0 + params["c1"] * envelope * np.cos(params["omega1"] * t + params["phi1"])
        out = np.full(t.shape, c0, dtype=float)
        for i in range(1, n_components + 1):
            out += params[f"c{i}"] * np.exp(-t / params[f"tau{i}"]) * np.cos(params[f"omega{i}"] * t + params[f"phi{i}"])
        return out


def _residual(params: Parameters, s: np.ndarray, data: np.ndarray, kind: FitModelKind, n: int) -> np.ndarray:
    return FitModels.evaluate(kind, params.valuesdict(), s, n) - data


class SignalAnalyzer:
    """Stateless signal analysis; safe to call from worker threads."""

    @staticmethod
    def _uniform_dt(times: np.ndarray) -> float:
        steps = np.diff(times)
        if steps.size == 0 or not np.all(steps > 0):
            raise InvalidConfigError("sample times must be strictly increasing with at least two points")
        dt = float(steps.mean())
        if np.max(np.abs(steps - dt)) > 1e-6 * dt:
            raise InvalidConfigError("sample times must be uniformly spaced")
        return dt

    @staticmethod
    def _frequency_guesses(y: np.ndarray, dt: float, count: int) -> List[float]:
        """Strongest zero-padded FFT peaks (rad/s), largest first."""
        n = y.size
        window = get_window("hann", n)
        centered = (y - np.sum(window * y) / np.sum(window)) * window
        magnitude = np.abs(np.fft.rfft(centered, n=_PAD * n))
        peaks, _ = find_peaks(magnitude)
        peaks = [int(k) for k in peaks if k >= _PAD]
        peaks.sort(key=lambda k: -magnitude[k])
        resolution = 2.0 * math.pi / (_PAD * n * dt)
        guesses = [k * resolution for k in peaks[:count]]
        while len(guesses) < count:
            guesses.append((len(guesses) + 1) * 2.0 * math.pi / (n * dt))
        return guesses

    @staticmethod
    def _envelope_tau(s: np.ndarray, y: np.ndarray) -> float:
        """Decay time (scaled units) from the log of the analytic-signal envelope."""
        envelope = np.abs(hilbert(y - y.mean()))
        lo, hi = int(0.1 * s.size), max(int(0.9 * s.size), int(0.1 * s.size) + 2)
        seg_s, seg_e = s[lo:hi], envelope[lo:hi]
        keep = seg_e > 1e-6 * max(float(envelope.max()), 1e-300)
        if keep.sum() < 2:
            return 10.0
        slope = np.polyfit(seg_s[keep], np.log(seg_e[keep]), 1)[0]
        return -1.0 / slope if slope < -1e-12 else 10.0

    @staticmethod
    def _linear_amplitudes(basis_envelopes: List[np.ndarray], omegas: List[float], s: np.ndarray,
                           y: np.ndarray) -> Tuple[float, List[float], List[float]]:
        """c0 and per-component (c_i, φ_i) by linear least squares at fixed ω, envelope."""
        columns = [np.ones_like(s)]
        for envelope, omega in zip(basis_envelopes, omegas):
            columns += [envelope * np.cos(omega * s), envelope * np.sin(omega * s)]
        coef = np.linalg.lstsq(np.column_stack(columns), y, rcond=None)[0]
        amps, phases = [], []
        for i in range(len(omegas)):
            a, b = coef[1 + 2 * i], coef[2 + 2 * i]
            amps.append(float(math.hypot(a, b)))
            phases.append(float(math.atan2(-b, a)))
        return float(coef[0]), amps, phases

    @classmethod
    def _initial_guess(cls, kind: FitModelKind, n: int, s: np.ndarray, y: np.ndarray,
                       dt_s: float, scale: float) -> Dict[str, float]:
        if kind is FitModelKind.EXPONENTIAL:
            candidates = []
            for rate in np.geomspace(0.1, 0.5 / dt_s, 80):
                design = np.column_stack([np.ones_like(s), np.exp(-rate * s)])
                coef, *_ = np.linalg.lstsq(design, y, rcond=None)
                cost = float(np.sum((design @ coef - y) ** 2))
                candidates.append((cost, float(coef[0]), float(coef[1]), float(rate)))
            _, c0, c1, rate = min(candidates)
            return {"c0": c0, "c1": c1, "rate": rate}

        omegas = [w * scale for w in cls._frequency_guesses(y, dt_s * scale, n)]
        if kind is FitModelKind.WINDOW_COSINE:
            c0, amps, phases = cls._linear_amplitudes([np.ones_like(s)], omegas[:1], s, y)
            return {"c0": c0, "c1": 2.0 * amps[0], "omega1": omegas[0], "phi1": phases[0]}

        tau = float(np.clip(cls._envelope_tau(s, y), 2.0 * dt_s, 1e5 * dt_s))
        envelopes = [np.exp(-s / tau)] * n
        c0, amps, phases = cls._linear_amplitudes(envelopes, omegas, s, y)
        guess = {"c0": c0}
        for i in range(n):
            guess.update({
                f"c{i + 1}": amps[i], f"tau{i + 1}": tau,
                f"omega{i + 1}": omegas[i], f"phi{i + 1}": phases[i],
            })
        if kind is FitModelKind.STRETCHED_COSINE:
            guess["alpha"] = 1.0
        return guess

    @staticmethod
    def _to_scaled(name: str, value: float, scale: float, t0: float, omega: float) -> float:
        if name.startswith("tau"):
            return value / scale
        if name.startswith("omega") or name == "rate":
            return value * scale
        if name.startswith("phi"):
            return value + omega * t0
        return value

    @staticmethod
    def _to_physical(name: str, value: float, scale: float, t0: float, omega: float) -> float:
        if name.startswith("tau"):
            return value * scale
        if name.startswith("omega") or name == "rate":
            return value / scale
        if name.startswith("phi"):
            return value - omega * t0
        return value

    @staticmethod
    def _flat(kind: FitModelKind, n: int, level: float) -> FitResult:
        params = {name: 0.0 for name in FitModels.names(kind, n)}
        params["c0"] = level
        for name in params:
            if name.startswith("tau"):
                params[name] = math.inf
            elif name == "alpha":
                params[name] = 1.0
        return FitResult(
            model=kind, params=params, stderrs={name: 0.0 for name in params},
            residual_rms=0.0, converged=True, n_components=n, report="flat signal",
        )

    @staticmethod
    def _canonical_components(kind: FitModelKind, n: int, params: Dict[str, float],
                              stderrs: Dict[str, float]) -> None:
        """Make amplitudes nonnegative (φ → φ + π) and order components by amplitude."""
        if kind is FitModelKind.EXPONENTIAL:
            return
        for i in range(1, n + 1):
            if params[f"c{i}"] < 0:
                params[f"c{i}"] = -params[f"c{i}"]
                params[f"phi{i}"] += math.pi
            params[f"phi{i}"] = _wrap(params[f"phi{i}"])
        if n == 1:
            return
        fields = ("c", "tau", "omega", "phi")
        order = sorted(range(1, n + 1), key=lambda i: -params[f"c{i}"])
        values = {f: [params[f"{f}{i}"] for i in order] for f in fields}
        errors = {f: [stderrs[f"{f}{i}"] for i in order] for f in fields}
        for f in fields:
            for j in range(n):
                params[f"{f}{j + 1}"] = values[f][j]
                stderrs[f"{f}{j + 1}"] = errors[f][j]

    @classmethod
    def fit(cls, times: np.ndarray, values: np.ndarray, model: FitModelKind, n_components: int = 1,
            hints: Optional[Mapping[str, float]] = None) -> FitResult:
        """Nonlinear least-squares fit of ``model``.

        Missing initial values come from zero-padded FFT peaks (frequencies),
        the log Hilbert envelope (decay) and a linear solve (amplitudes and
        phases). Raises FitFailureError, carrying the best-so-far result, when
        the solver stops without converging.
        """
        times = np.asarray(times, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if times.shape != values.shape:
            raise InvalidConfigError(f"times and values differ in length ({times.size} vs {values.size})")
        names = FitModels.names(model, n_components)
        if times.size < _SAMPLES_PER_PARAM * len(names):
            raise InvalidConfigError(
                f"{model.value} with {len(names)} parameters needs >= {_SAMPLES_PER_PARAM * len(names)} samples, "
                f"got {times.size}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidConfigError("signal contains non-finite samples")
        dt = cls._uniform_dt(times)
        if np.ptp(values) <= _FLAT_PTP:
            return cls._flat(model, n_components, float(values.mean()))

        scale = float(times[-1] - times[0])
        t0 = float(times[0]) if model is FitModelKind.WINDOW_COSINE else 0.0
        s = (times - t0) / scale
        dt_s = dt / scale

        guess = cls._initial_guess(model, n_components, s, values, dt_s, scale)
        hints = dict(hints or {})
        for name, value in hints.items():
            if name not in names:
                raise InvalidConfigError(f"unknown hint '{name}' for {model.value}; expected one of {names}")
            omega = 0.0
            if name.startswith("phi"):
                partner = name.replace("phi", "omega")
                omega = float(hints[partner]) if partner in hints else guess[partner] / scale
            guess[name] = cls._to_scaled(name, float(value), scale, t0, omega)

        params = Parameters()
        nyquist = math.pi / dt_s
        for name in names:
            value = guess[name]
            if name.startswith("tau"):
                params.add(name, value=float(np.clip(value, 1.01 * dt_s, 0.99 * _TAU_MAX_STEPS * dt_s)),
                           min=dt_s, max=_TAU_MAX_STEPS * dt_s)
            elif name.startswith("omega"):
                params.add(name, value=float(np.clip(value, 1e-6 * nyquist, 0.999 * nyquist)), min=0.0, max=nyquist)
            elif name == "rate":
                params.add(name, value=float(np.clip(value, 0.0, 0.999 / dt_s)), min=0.0, max=1.0 / dt_s)
            elif name == "alpha":
                params.add(name, value=float(np.clip(value, 0.05, 3.9)), min=_ALPHA_MIN, max=_ALPHA_MAX)
            else:
                params.add(name, value=float(value))

        out = minimize(
            _residual, params, method="leastsq", args=(s, values, model, n_components),
            max_nfev=_NFEV_PER_PARAM * (len(names) + 1), xtol=_TOL, ftol=_TOL, gtol=_TOL,
        )
        converged = bool(out.success) or getattr(out, "ier", 0) in _STALLED

        fitted = {name: float(out.params[name].value) for name in names}
        scaled_errors = {name: out.params[name].stderr for name in names}
        physical: Dict[str, float] = {}
        stderrs: Dict[str, float] = {}
        for name in names:
            omega = fitted[name.replace("phi", "omega")] / scale if name.startswith("phi") else 0.0
            physical[name] = cls._to_physical(name, fitted[name], scale, t0, omega)
            error = scaled_errors[name]
            stderrs[name] = math.nan if error is None else abs(cls._to_physical(name, float(error), scale, 0.0, 0.0))
        cls._canonical_components(model, n_components, physical, stderrs)

        report_params = Parameters()
        for name in names:
            report_params.add(name, value=physical[name])
            report_params[name].stderr = None if math.isnan(stderrs[name]) else stderrs[name]
        residual = np.asarray(out.residual, dtype=float)
        result = FitResult(
            model=model, params=physical, stderrs=stderrs,
            residual_rms=float(np.sqrt(np.mean(residual ** 2))), converged=converged,
            n_components=n_components, report=fit_report(report_params),
        )
        if not converged:
            raise FitFailureError(f"{model.value} fit did not converge: {out.message}", result=result)
        return result

    @classmethod
    def window_contrast(cls, times: np.ndarray, values: np.ndarray,
                        hints: Optional[Mapping[str, float]] = None) -> WindowContrast:
        """c0 + ½c1·cos(ω1 t + φ1) on a short window, with c1 >= 0."""
        values = np.asarray(values, dtype=float)
        if values.size and np.ptp(values) <= _FLAT_PTP:
            return WindowContrast(c0=float(values.mean()), c1=0.0, omega1=math.nan, phi1=0.0)
        fit = cls.fit(times, values, FitModelKind.WINDOW_COSINE, hints=hints)
        p = fit.params
        return WindowContrast(c0=p["c0"], c1=p["c1"], omega1=p["omega1"], phi1=p["phi1"])

    @classmethod
    def spectrum_peaks(cls, times: np.ndarray, values: np.ndarray, n_peaks: int) -> List[Tuple[float, float]]:
        """Up to ``n_peaks`` (ω in rad/s, amplitude) pairs, strongest first.

        Hann-windowed FFT with parabolic interpolation of the log magnitude.
        The amplitude is that of the matching cosine component.
        """
        if n_peaks < 1:
            raise InvalidConfigError(f"'n_peaks' must be >= 1, got {n_peaks}")
        times = np.asarray(times, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        dt = cls._uniform_dt(times)
        n = values.size
        window = get_window("hann", n)
        centered = values - np.sum(window * values) / np.sum(window)
        magnitude = np.abs(np.fft.rfft(centered * window))
        top = float(magnitude.max()) if magnitude.size else 0.0
        if top <= _FLAT_PTP * max(1.0, float(np.max(np.abs(values)))) * n:
            return []
        peaks, _ = find_peaks(magnitude, height=_PEAK_FLOOR * top)
        log_mag = np.log(np.maximum(magnitude, 1e-300))
        found = []
        for k in peaks:
            if k < 2 or k >= magnitude.size - 1:
                continue
            a, b, c = log_mag[k - 1], log_mag[k], log_mag[k + 1]
            curvature = a - 2.0 * b + c
            p = 0.5 * (a - c) / curvature if curvature != 0 else 0.0
            peak = math.exp(b - 0.25 * (a - c) * p)
            found.append((2.0 * math.pi * (k + p) / (n * dt), 2.0 * peak / float(np.sum(window))))
        found.sort(key=lambda pair: -pair[1])
        return found[:n_peaks]
