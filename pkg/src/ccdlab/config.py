"""TOML run configuration.

User-facing units are MHz (ordinary frequency), μs and radians; the
``to_*`` helpers convert to rad/s and s. Every section is a frozen dataclass
with defaults, so an empty file is a valid configuration. Unknown keys and
wrong types are rejected with a ``[section].key: ...`` message.
"""
import dataclasses
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Type, TypeVar, Union, get_args, get_origin, get_type_hints

import tomli_w

from .drive import TWO_PI, DriveConfig, InhomogeneityModel, QubitState
from .enums import (
    BlochAxis, ContrastMode, FitModelKind, Frame, Modulation, NoiseSourceKind, NoiseTarget, RabiPrefactor,
    RateVariant, Scenario,
)
from .errors import ConfigSchemaError, InvalidConfigError
from .interfaces import INoiseSource, ISpectralFunction
from .schemas import SweepGrid2D, TimeGrid
from .services.stochastic import NoiseTrajectorySpec, OUSource, StaticGaussianSource, WhiteBandLimitedSource
from .spectra import ZERO, Lorentzian, NoisePSDSet, SpectrumSum, StaticGaussian, White

MHZ = TWO_PI * 1e6
US = 1e-6

S = TypeVar("S")
E = TypeVar("E", bound=Enum)

_SPECTRUM_KINDS = ("white", "lorentzian", "static", "sum")


def _choice(enum_cls: Type[E], value: str, where: str) -> E:
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(repr(m.value) for m in enum_cls)
        raise ConfigSchemaError(f"{where}: {value!r} is not one of {allowed}") from None


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    out: str = "out"

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigSchemaError(f"[run].seed: must be in [0, 2^64), got {self.seed}")


@dataclass(frozen=True)
class DriveSection:
    omega0_mhz: float = 2207.2
    detuning_mhz: float = 0.0
    rabi_mhz: float = 7.5
    eps_m_mhz: float = 0.0
    omega_m_mhz: Optional[float] = None
    phi0: float = 0.0
    phi_m: float = 0.0
    modulation: str = Modulation.AMPLITUDE.value

    def __post_init__(self) -> None:
        _choice(Modulation, self.modulation, "[drive].modulation")

    def to_drive_config(self) -> DriveConfig:
        return DriveConfig.rotating(
            Omega=self.rabi_mhz * MHZ,
            delta=self.detuning_mhz * MHZ,
            eps_m=self.eps_m_mhz * MHZ,
            omega_m=None if self.omega_m_mhz is None else self.omega_m_mhz * MHZ,
            phi0=self.phi0,
            phi_m=self.phi_m,
            modulation=Modulation(self.modulation),
            omega0=self.omega0_mhz * MHZ,
        )


@dataclass(frozen=True)
class StateSection:
    """Initial state on the Bloch sphere; (0, 0) is |0>."""

    theta: float = 0.0
    phi: float = 0.0

    def to_state(self) -> QubitState:
        return QubitState.from_bloch_angles(self.theta, self.phi)


@dataclass(frozen=True)
class GridSection:
    t_start_us: float = 0.0
    t_end_us: float = 10.0
    n_points: int = 2001

    def to_grid(self) -> TimeGrid:
        return TimeGrid(self.t_start_us * US, self.t_end_us * US, self.n_points)


@dataclass(frozen=True)
class SpectrumSection:
    """One lab PSD member: white ``level`` (s⁻¹), Lorentzian or static ``sigma_mhz``, or a sum of ``terms``."""

    kind: str = "white"
    level: float = 0.0
    sigma_mhz: float = 0.0
    tau_c_us: float = 1.0
    terms: Tuple["SpectrumSection", ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _SPECTRUM_KINDS:
            allowed = ", ".join(repr(k) for k in _SPECTRUM_KINDS)
            raise ConfigSchemaError(f"kind: {self.kind!r} is not one of {allowed}")

    def to_spectrum(self) -> ISpectralFunction:
        if self.kind == "white":
            return White(self.level) if self.level else ZERO
        if self.kind == "lorentzian":
            return Lorentzian.from_sigma(self.sigma_mhz * MHZ, self.tau_c_us * US)
        if self.kind == "static":
            return StaticGaussian(self.sigma_mhz * MHZ)
        return SpectrumSum(tuple(term.to_spectrum() for term in self.terms))


@dataclass(frozen=True)
class NoiseSection:
    S_x: SpectrumSection = field(default_factory=SpectrumSection)
    S_z: SpectrumSection = field(default_factory=SpectrumSection)
    S_Omega: SpectrumSection = field(default_factory=SpectrumSection)
    S_em: SpectrumSection = field(default_factory=SpectrumSection)

    def to_psd_set(self) -> NoisePSDSet:
        return NoisePSDSet(
            S_x=self.S_x.to_spectrum(), S_z=self.S_z.to_spectrum(),
            S_Omega=self.S_Omega.to_spectrum(), S_em=self.S_em.to_spectrum(),
        )


@dataclass(frozen=True)
class InhomogeneitySection:
    """Ensemble spread; the defaults are the measured NV ensemble."""

    sigma_rabi_rel: float = 0.016
    sigma_detuning_mhz: float = 0.32
    tau0_us: float = 13.0
    hyperfine_mhz: float = 2.2
    populations: Tuple[float, ...] = (0.135, 0.73, 0.135)

    def __post_init__(self) -> None:
        if len(self.populations) != 3:
            raise ConfigSchemaError(
                f"[inhomogeneity].populations: expected 3 values, got {len(self.populations)}"
            )

    def to_model(self) -> InhomogeneityModel:
        return InhomogeneityModel.from_hyperfine(
            sigma_Omega_rel=self.sigma_rabi_rel,
            sigma_omega=self.sigma_detuning_mhz * MHZ,
            tau0=self.tau0_us * US,
            hyperfine_A=self.hyperfine_mhz * MHZ,
            populations=(self.populations[0], self.populations[1], self.populations[2]),
        )


@dataclass(frozen=True)
class EvolveSection:
    frame: str = Frame.FRAME1.value
    allow_lab: bool = False
    readout: str = BlochAxis.Z.value
    steps_per_cycle: int = 200
    fit: bool = False
    fit_model: str = FitModelKind.DAMPED_COSINE.value
    n_components: int = 1

    def __post_init__(self) -> None:
        _choice(Frame, self.frame, "[evolve].frame")
        _choice(BlochAxis, self.readout, "[evolve].readout")
        _choice(FitModelKind, self.fit_model, "[evolve].fit_model")


@dataclass(frozen=True)
class FloquetSection:
    n_samples: int = 256
    substeps: int = 16
    n_max: int = 4
    mode_control: bool = False
    refine: bool = False
    eps_sweep_mhz: Tuple[float, ...] = ()


@dataclass(frozen=True)
class RatesSection:
    scenario: str = Scenario.CCD_AMPLITUDE.value
    variant: str = RateVariant.EXACT.value
    eps_sweep_mhz: Tuple[float, ...] = ()
    rabi_sweep_mhz: Tuple[float, ...] = ()
    rho: Optional[float] = None
    relative_em_noise: bool = False

    def __post_init__(self) -> None:
        _choice(Scenario, self.scenario, "[rates].scenario")
        _choice(RateVariant, self.variant, "[rates].variant")


@dataclass(frozen=True)
class TrajectoryNoiseSection:
    """One ``[[montecarlo.noise]]`` process; ``sigma_mhz`` is its own standard deviation."""

    target: str = NoiseTarget.XI_Z.value
    kind: str = NoiseSourceKind.OU.value
    sigma_mhz: float = 0.0
    tau_c_us: float = 1.0
    level: float = 0.0
    cutoff_mhz: float = math.inf
    seed: int = 1

    def __post_init__(self) -> None:
        _choice(NoiseTarget, self.target, "[montecarlo.noise].target")
        _choice(NoiseSourceKind, self.kind, "[montecarlo.noise].kind")


@dataclass(frozen=True)
class MonteCarloSection:
    n_traj: int = 200
    batch_size: int = 64
    readout: str = BlochAxis.Z.value
    frame: str = Frame.FRAME1.value
    fit: bool = True
    fit_model: str = FitModelKind.EXPONENTIAL.value
    n_boot: int = 20
    from_psd: bool = False
    noise: Tuple[TrajectoryNoiseSection, ...] = ()

    def __post_init__(self) -> None:
        _choice(BlochAxis, self.readout, "[montecarlo].readout")
        _choice(Frame, self.frame, "[montecarlo].frame")
        _choice(FitModelKind, self.fit_model, "[montecarlo].fit_model")


@dataclass(frozen=True)
class EnsembleSection:
    prefactor: str = RabiPrefactor.LINEAR.value
    order: int = 24
    rabi_sweep_mhz: Tuple[float, ...] = ()
    detuning_sweep_mhz: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        _choice(RabiPrefactor, self.prefactor, "[ensemble].prefactor")


@dataclass(frozen=True)
class MapSection:
    """Contrast map axes as (start, stop, count) in MHz; ε_m = rho·Ω per point."""

    rabi_mhz: Tuple[float, ...] = (5.0, 10.0, 11)
    detuning_mhz: Tuple[float, ...] = (-6.0, 6.0, 25)
    rho: float = 0.5
    mode: str = ContrastMode.SINGLE_SPIN.value
    window_start_us: float = 50.0
    window_end_us: float = 50.5
    window_points: int = 201
    n_max: int = 8

    def __post_init__(self) -> None:
        for name in ("rabi_mhz", "detuning_mhz"):
            axis = getattr(self, name)
            if len(axis) != 3 or axis[2] != int(axis[2]) or axis[2] < 1:
                raise ConfigSchemaError(f"[map].{name}: expected [start, stop, count], got {list(axis)}")
        _choice(ContrastMode, self.mode, "[map].mode")

    def to_sweep(self) -> SweepGrid2D:
        a0, a1, na = self.rabi_mhz
        d0, d1, nd = self.detuning_mhz
        return SweepGrid2D.linspace((a0 * MHZ, a1 * MHZ, int(na)), (d0 * MHZ, d1 * MHZ, int(nd)))

    def to_window(self) -> TimeGrid:
        return TimeGrid(self.window_start_us * US, self.window_end_us * US, self.window_points)


@dataclass(frozen=True)
class FitSection:
    """Fit of column ``column`` against column 0 (time in μs) of ``input``."""

    input: str = ""
    column: int = 1
    model: str = FitModelKind.DAMPED_COSINE.value
    n_components: int = 1

    def __post_init__(self) -> None:
        if self.column < 1:
            raise ConfigSchemaError(f"[fit].column: must be >= 1, got {self.column}")
        _choice(FitModelKind, self.model, "[fit].model")


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    drive: DriveSection = field(default_factory=DriveSection)
    state: StateSection = field(default_factory=StateSection)
    grid: GridSection = field(default_factory=GridSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    inhomogeneity: InhomogeneitySection = field(default_factory=InhomogeneitySection)
    evolve: EvolveSection = field(default_factory=EvolveSection)
    floquet: FloquetSection = field(default_factory=FloquetSection)
    rates: RatesSection = field(default_factory=RatesSection)
    montecarlo: MonteCarloSection = field(default_factory=MonteCarloSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    map: MapSection = field(default_factory=MapSection)
    fit: FitSection = field(default_factory=FitSection)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        return ConfigParser.parse_section(cls, data, "")

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigSchemaError(f"invalid TOML: {e}") from e
        return cls.from_mapping(data)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise InvalidConfigError(f"config file not found: {path}")
        return cls.from_toml(path.read_text(encoding="utf-8"))

    def replace(self, section: str, **changes: Any) -> "RunConfig":
        """Copy with keys of one section changed, re-validated."""
        updated = ConfigParser.plain(getattr(self, section))
        updated.update(changes)
        return dataclasses.replace(
            self, **{section: ConfigParser.parse_section(type(getattr(self, section)), updated, section)}
        )

    def to_dict(self) -> Dict[str, Any]:
        return ConfigParser.plain(self)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())


class ConfigParser:
    """Type-directed conversion of TOML tables into the section dataclasses."""

    @classmethod
    def parse_section(cls, section_cls: Type[S], data: Any, where: str) -> S:
        label = f"[{where}]" if where else "config"
        if not isinstance(data, Mapping):
            raise ConfigSchemaError(f"{label}: expected a table, got {type(data).__name__}")
        hints = get_type_hints(section_cls)
        known = [f.name for f in fields(section_cls)]  # type: ignore[arg-type]
        for key in data:
            if key not in known:
                what = "unknown section" if not where else "unknown key"
                raise ConfigSchemaError(f"{cls._location(where, key)}: {what}")
        values = {
            name: cls._coerce(hints[name], data[name], where, name) for name in known if name in data
        }
        try:
            return section_cls(**values)
        except ConfigSchemaError as e:
            if str(e).startswith("["):
                raise
            raise ConfigSchemaError(f"{label}.{e}") from e

    @staticmethod
    def _location(where: str, key: str) -> str:
        return f"[{where}].{key}" if where else f"[{key}]"

    @classmethod
    def _coerce(cls, tp: Any, value: Any, where: str, key: str) -> Any:
        loc = cls._location(where, key)
        origin = get_origin(tp)
        if origin is Union:
            inner = [a for a in get_args(tp) if a is not type(None)][0]
            return cls._coerce(inner, value, where, key)
        if origin is tuple:
            if not isinstance(value, list):
                raise ConfigSchemaError(f"{loc}: expected an array, got {type(value).__name__}")
            item = get_args(tp)[0]
            return tuple(cls._coerce(item, v, where, f"{key}[{i}]") for i, v in enumerate(value))
        if dataclasses.is_dataclass(tp):
            nested = f"{where}.{key}" if where else key
            return cls.parse_section(tp, value, nested)
        # bool is a subclass of int, so it is excluded from the numeric checks.
        if tp is bool:
            if not isinstance(value, bool):
                raise ConfigSchemaError(f"{loc}: expected a boolean, got {value!r}")
            return value
        if tp is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigSchemaError(f"{loc}: expected an integer, got {value!r}")
            return value
        if tp is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigSchemaError(f"{loc}: expected a number, got {value!r}")
            return float(value)
        if tp is str:
            if not isinstance(value, str):
                raise ConfigSchemaError(f"{loc}: expected a string, got {value!r}")
            return value
        raise ConfigSchemaError(f"{loc}: unsupported field type {tp!r}")

    @classmethod
    def plain(cls, obj: Any) -> Any:
        """TOML-ready form: tuples as lists, None dropped."""
        if dataclasses.is_dataclass(obj):
            return {
                f.name: cls.plain(getattr(obj, f.name))
                for f in fields(obj) if getattr(obj, f.name) is not None
            }
        if isinstance(obj, (list, tuple)):
            return [cls.plain(v) for v in obj]
        return obj


def noise_specs(config: RunConfig) -> List[NoiseTrajectorySpec]:
    """Trajectory noise specs of a run: explicit processes, then ``[noise]`` members if requested."""

    specs: List[NoiseTrajectorySpec] = []
    for entry in config.montecarlo.noise:
        kind = NoiseSourceKind(entry.kind)
        if kind is NoiseSourceKind.OU:
            source: INoiseSource = OUSource((entry.sigma_mhz * MHZ) ** 2, entry.tau_c_us * US)
        elif kind is NoiseSourceKind.WHITE_BAND_LIMITED:
            source = WhiteBandLimitedSource(entry.level, entry.cutoff_mhz * MHZ)
        else:
            source = StaticGaussianSource(entry.sigma_mhz * MHZ)
        specs.append(NoiseTrajectorySpec(source, NoiseTarget(entry.target), entry.seed))

    if config.montecarlo.from_psd:
        targets = {
            "S_x": NoiseTarget.XI_X, "S_z": NoiseTarget.XI_Z,
            "S_Omega": NoiseTarget.XI_OMEGA, "S_em": NoiseTarget.XI_EM,
        }
        seed = max((s.seed for s in specs), default=0) + 1
        for name, member in config.noise.to_psd_set().members().items():
            parts = member.terms if isinstance(member, SpectrumSum) else (member,)
            for part in parts:
                if part == ZERO:
                    continue
                specs.append(NoiseTrajectorySpec.from_spectrum(part, targets[name], seed))
                seed += 1
    return specs
