from enum import Enum

import numpy as np


class Modulation(Enum):
    """Kind of second (modulating) drive applied on top of the carrier."""
    AMPLITUDE = "amplitude"
    PHASE = "phase"
    NONE = "none"


class Frame(Enum):
    """Reference frame a trajectory is expressed in."""
    LAB = "lab"
    FRAME1 = "frame1"
    FRAME2 = "frame2"


class Scenario(Enum):
    """Driving scenario a set of decay rates was derived for."""
    SINGLE_RESONANT = "single_resonant"
    SINGLE_DETUNED = "single_detuned"
    CCD_AMPLITUDE = "ccd_amplitude"
    CCD_PHASE = "ccd_phase"


class RateVariant(Enum):
    """Which closed form of the relaxation rates to evaluate.

    EXACT keeps every spectral argument (S_x(ω0 ± Ω) etc.). APPROXIMATED
    collapses carrier-shifted arguments to S_x(ω0). SIMPLIFIED additionally
    drops the counter-rotating modulation-noise terms S_εm(2Ω ± ε_m).
    SMALL_MODULATION evaluates the ε_m ≪ Ω closed forms. STRUCTURAL keeps
    exact arguments and, for the detuned drive, projects the noise onto the
    tilted axes instead of using the closed form.
    """
    EXACT = "exact"
    APPROXIMATED = "approximated"
    SIMPLIFIED = "simplified"
    SMALL_MODULATION = "small_modulation"
    STRUCTURAL = "structural"


class FitModelKind(Enum):
    EXPONENTIAL = "exponential"
    DAMPED_COSINE = "damped_cosine"
    STRETCHED_COSINE = "stretched_cosine"
    WINDOW_COSINE = "window_cosine"


class SpectrumKind(Enum):
    WHITE = "white"
    LORENTZIAN = "lorentzian"
    STATIC_GAUSSIAN = "static"
    SUM = "sum"
    TRANSFORMED = "transformed"


class NoiseTarget(Enum):
    """Hamiltonian coefficient a stochastic process is injected into."""
    XI_X = "xi_x"
    XI_Z = "xi_z"
    XI_OMEGA = "xi_omega"
    XI_EM = "xi_em"


class NoiseSourceKind(Enum):
    OU = "ou"
    WHITE_BAND_LIMITED = "white"
    STATIC_GAUSSIAN = "static"


class BlochAxis(Enum):
    """Readout axes; P(+n) = (1 + n·r) / 2. Z is the |0> population."""
    X = "x"
    Y = "y"
    Z = "z"
    MINUS_X = "-x"
    MINUS_Y = "-y"
    MINUS_Z = "-z"

    @property
    def vector(self) -> np.ndarray:
        return {
            BlochAxis.X: np.array([1.0, 0.0, 0.0]),
            BlochAxis.Y: np.array([0.0, 1.0, 0.0]),
            BlochAxis.Z: np.array([0.0, 0.0, 1.0]),
            BlochAxis.MINUS_X: np.array([-1.0, 0.0, 0.0]),
            BlochAxis.MINUS_Y: np.array([0.0, -1.0, 0.0]),
            BlochAxis.MINUS_Z: np.array([0.0, 0.0, -1.0]),
        }[self]


class RabiPrefactor(Enum):
    """Amplitude prefactor of each ensemble member's Rabi oscillation."""
    LINEAR = "linear"       # Ω / Ω_R
    STANDARD = "standard"  # Ω² / Ω_R²


class ContrastMode(Enum):
    SINGLE_SPIN = "single_spin"
    ENSEMBLE = "ensemble"


class BandFamily(Enum):
    """Frequency families of the Floquet band spectrum."""
    CENTER = "center"  # n·ω_m
    UPPER = "upper"    # n·ω_m + gap
    LOWER = "lower"    # n·ω_m - gap


class LogLevel(Enum):
    DEBUG = "debug"
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"


class ExitCode(Enum):
    OK = 0
    CONFIG_ERROR = 2
    NUMERIC_FAILURE = 3


class Command(Enum):
    EVOLVE = "evolve"
    FLOQUET = "floquet"
    RATES = "rates"
    MONTECARLO = "montecarlo"
    ENSEMBLE = "ensemble"
    MAP = "map"
    FIT = "fit"


class OutputFormat(Enum):
    CSV = "csv"
    JSON = "json"


class EnvVar(Enum):
    """Environment variable names."""
    CCDLAB_THREADS = "CCDLAB_THREADS"
    CCDLAB_LOG_LEVEL = "CCDLAB_LOG_LEVEL"


class ResultKey(Enum):
    """Keys and column headers of emitted result files (no magic strings)."""
    # tables
    TIME_US = "time_us"
    P0 = "p0"
    SIGNAL = "signal"
    MEAN = "mean"
    STDERR = "stderr"
    RABI_MHZ = "rabi_mhz"
    DETUNING_MHZ = "detuning_mhz"
    EPS_M_MHZ = "eps_m_mhz"
    TAU_US = "tau_us"
    CONVERGED = "converged"
    # metadata
    COMMAND = "command"
    SEED = "seed"
    VERSION = "version"
    FILES = "files"
    ERROR = "error"
    # floquet
    LAMBDA_PLUS = "lambda_plus"
    LAMBDA_MINUS = "lambda_minus"
    GAP = "gap"
    BANDS = "bands"
    PHASES = "phases"
    PHI0 = "phi0"
    PHI_M = "phi_m"
    COEFFICIENTS = "coefficients"
    GAP_TABLE = "gap_table"
    FAMILY = "family"
    INDEX = "index"
    FREQUENCY = "frequency"
    FREQUENCY_MHZ = "frequency_mhz"
    AMPLITUDE_RE = "amplitude_re"
    AMPLITUDE_IM = "amplitude_im"
    # rates
    SCENARIO = "scenario"
    VARIANT = "variant"
    FRAME = "frame"
    GAMMA_X = "gamma_x"
    GAMMA_Y = "gamma_y"
    GAMMA_Z = "gamma_z"
    RATE_1 = "rate_1"
    RATE_2 = "rate_2"
    RATE_2_PURE = "rate_2_pure"
    T1_S = "t1_s"
    T2_S = "t2_s"
    T2_PURE_S = "t2_pure_s"
    VALID = "valid"
    SWEEP = "sweep"
    # fits
    MODEL = "model"
    PARAMS = "params"
    STDERRS = "stderrs"
    RESIDUAL_RMS = "residual_rms"
    RATE = "rate"
    HALF_WIDTH = "half_width"
    N_TRAJ = "n_traj"
    FIT = "fit"
    # map
    RHO = "rho"
    MODE = "mode"
    FWHM_MHZ = "fwhm_mhz"
    LOCUS_MHZ = "locus_mhz"
