"""Domain types, unit conventions and closed-form scalar relations.

Unit convention used across the package: every user-facing rate, detuning and
frequency is an ordinary frequency in Hz. Formulas that are conventionally
written with angular frequencies convert internally (a single 2*pi boundary,
so factor-of-2*pi bugs cannot creep in at call sites).
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Bohr magneton over Planck constant, MHz per Gauss.
BOHR_MAGNETON_MHZ_PER_GAUSS = 1.3996


class Waveform(enum.Enum):
    """Phase-modulation waveform: phase(t) = index * sin/cos(2*pi*f_c*t)."""

    SINE = "sine"
    COSINE = "cosine"


class ProbeShape(enum.Enum):
    SQUARE_PULSE = "square"
    CONTINUOUS_WAVE = "cw"


class ValidationError(ValueError):
    """A scenario parameter violates a hard precondition."""


class NumericsError(RuntimeError):
    """A numerical procedure failed its convergence or sanity check."""


class AmbiguityError(RuntimeError):
    """A field estimate cannot be pinned down from the given data."""


@dataclass(frozen=True)
class ModulationSpec:
    """Sinusoidal phase modulation of the coupling field.

    The optical carrier frequency never enters any computation here; it
    cancels in the rotating frame. Only the modulation index (peak phase
    excursion, dimensionless) and the modulation frequency matter.
    """

    modulation_index: float
    mod_frequency: float  # Hz
    waveform: Waveform = Waveform.SINE

    def __post_init__(self):
        if not (self.modulation_index >= 0.0) or not math.isfinite(self.modulation_index):
            raise ValidationError(f"modulation_index must be >= 0, got {self.modulation_index}")
        if not (self.mod_frequency > 0.0) or not math.isfinite(self.mod_frequency):
            raise ValidationError(f"mod_frequency must be > 0, got {self.mod_frequency}")
        if not isinstance(self.waveform, Waveform):
            raise ValidationError(f"waveform must be a Waveform, got {self.waveform!r}")

    @property
    def omega_c_ang(self) -> float:
        """Angular modulation frequency, rad/s."""
        return TWO_PI * self.mod_frequency

    def phase(self, t):
        """Phase excursion phi(t) in radians. Accepts scalars or arrays."""
        arg = self.omega_c_ang * np.asarray(t, dtype=float)
        if self.waveform is Waveform.SINE:
            return self.modulation_index * np.sin(arg)
        return self.modulation_index * np.cos(arg)

    def phase_rate_ang(self, t):
        """d(phi)/dt in rad/s."""
        arg = self.omega_c_ang * np.asarray(t, dtype=float)
        scale = self.modulation_index * self.omega_c_ang
        if self.waveform is Waveform.SINE:
            return scale * np.cos(arg)
        return -scale * np.sin(arg)


@dataclass(frozen=True)
class MediumSpec:
    """EIT medium parameters.

    ``alpha`` is a dimensionless overall transfer-function scale (default 1),
    not a physical absorption coefficient with a length; the bracketed
    susceptibility is used directly as the probe transfer function.
    ``rabi_coupling`` follows the transfer-function convention: it enters the
    power-broadening term of the linewidth and the susceptibility as
    rabi_coupling**2 (the Bloch oracle builder converts, see bloch module).
    """

    gamma_hom: float  # Gamma, homogeneous decay, Hz
    gamma_doppler: float  # Gamma_D, Doppler broadening treated as constant, Hz
    gamma_12: float  # ground-state decoherence, Hz
    rabi_coupling: float  # Rc, Hz
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("gamma_hom", "gamma_doppler", "rabi_coupling"):
            v = getattr(self, name)
            if name == "gamma_doppler":
                ok = v >= 0.0
            else:
                ok = v > 0.0
            if not ok or not math.isfinite(v):
                raise ValidationError(f"{name} must be positive and finite, got {v}")
        if not (self.gamma_12 >= 0.0) or not math.isfinite(self.gamma_12):
            raise ValidationError(f"gamma_12 must be >= 0, got {self.gamma_12}")
        if not (self.alpha > 0.0) or not math.isfinite(self.alpha):
            raise ValidationError(f"alpha must be > 0, got {self.alpha}")

    @property
    def gamma_eff(self) -> float:
        """Total one-photon broadening Gamma + Gamma_D, Hz."""
        return self.gamma_hom + self.gamma_doppler


@dataclass(frozen=True)
class ProbeSpec:
    """Probe field: envelope shape, detunings and (oracle-only) Rabi frequency.

    ``rabi_probe`` uses the same convention as MediumSpec.rabi_coupling and is
    consumed only by the Bloch oracle. ``delta_one_photon`` and
    ``delta_two_photon`` are the probe's carrier detunings in Hz.
    """

    shape: ProbeShape = ProbeShape.SQUARE_PULSE
    amplitude: float = 1.0
    turn_on: float = 0.0  # s
    duration: float = 1e-3  # s
    rabi_probe: float = 1.0  # Hz
    delta_one_photon: float = 0.0  # Hz
    delta_two_photon: float = 0.0  # Hz

    def __post_init__(self):
        if self.shape is ProbeShape.SQUARE_PULSE and not (self.duration > 0.0):
            raise ValidationError(f"duration must be > 0 for a square pulse, got {self.duration}")
        if self.turn_on < 0.0:
            raise ValidationError(f"turn_on must be >= 0, got {self.turn_on}")
        if not (self.rabi_probe > 0.0):
            raise ValidationError(f"rabi_probe must be > 0, got {self.rabi_probe}")
        for name in ("amplitude", "delta_one_photon", "delta_two_photon"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")


# Channels are (delta_m, weight); the three-line axial-field configuration.
DEFAULT_CHANNELS = ((-2, 0.25), (0, 0.5), (2, 0.25))


@dataclass(frozen=True)
class MagneticSpec:
    """Axial magnetic field and the three delta_m channels it splits EIT into.

    Each channel shifts the two-photon resonance by
    delta_m * (mu_B/h) * g_lower * B (Hz), antisymmetric in delta_m.
    ``g_upper`` is carried for documentation of the collapsed sublevel
    structure; the channel shift uses the lower-manifold factor only.
    """

    field: float  # Gauss
    g_lower: float = 0.5
    g_upper: float = 0.5
    bohr_magneton_over_h: float = BOHR_MAGNETON_MHZ_PER_GAUSS  # MHz/Gauss
    channels: tuple = DEFAULT_CHANNELS

    def __post_init__(self):
        if not math.isfinite(self.field):
            raise ValidationError("field must be finite")
        if len(self.channels) != 3:
            raise ValidationError(f"exactly three delta_m channels required, got {len(self.channels)}")
        weights = [w for _, w in self.channels]
        if any(w < 0 for w in weights):
            raise ValidationError("channel weights must be >= 0")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValidationError(f"channel weights must sum to 1, got {sum(weights)}")
        for dm, _ in self.channels:
            if dm not in (-2, 0, 2):
                raise ValidationError(f"delta_m must be in {{-2, 0, +2}}, got {dm}")
        if not (self.bohr_magneton_over_h > 0):
            raise ValidationError("bohr_magneton_over_h must be > 0")

    def zeeman_shift(self, delta_m: int) -> float:
        """Two-photon shift of one channel, Hz."""
        return delta_m * self.bohr_magneton_over_h * 1e6 * self.g_lower * self.field


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency grid, Hz."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0.0):
            raise ValidationError(f"grid step must be > 0, got {self.step}")
        if self.count < 2:
            raise ValidationError(f"grid count must be >= 2, got {self.count}")

    def values(self):
        return self.start + self.step * np.arange(self.count)

    @property
    def span(self) -> float:
        return self.step * (self.count - 1)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid, s."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0.0):
            raise ValidationError(f"grid step must be > 0, got {self.step}")
        if self.count < 2:
            raise ValidationError(f"grid count must be >= 2, got {self.count}")

    def values(self):
        return self.start + self.step * np.arange(self.count)

    @property
    def span(self) -> float:
        return self.step * self.count


@dataclass(frozen=True)
class Scenario:
    """Full parameter set for one simulation run."""

    modulation: ModulationSpec
    medium: MediumSpec
    probe: ProbeSpec
    magnetic: MagneticSpec | None = None


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    message: str


def eit_linewidth(medium: MediumSpec) -> float:
    """FWHM of the EIT transparency window, Hz.

    2*(gamma_12 + Rc**2/(Gamma_D + Gamma)); the expression is form-invariant
    between Hz and angular units, so plain Hz inputs give Hz out.
    """
    return 2.0 * (medium.gamma_12 + medium.rabi_coupling**2 / (medium.gamma_doppler + medium.gamma_hom))


def instantaneous_frequency(mod: ModulationSpec, t) -> float:
    """Instantaneous coupling-frequency offset from the carrier, Hz.

    d(phi)/dt / 2*pi; for the sine waveform this is
    index * f_c * cos(2*pi*f_c*t).
    """
    return mod.phase_rate_ang(t) / TWO_PI


def chirp_rate(mod: ModulationSpec, t) -> float:
    """Rate of change of the instantaneous frequency offset, Hz/s.

    Second derivative of phi(t) divided by 2*pi. Its magnitude where the
    instantaneous frequency crosses zero is index * omega_c**2 / (2*pi).
    """
    arg = mod.omega_c_ang * np.asarray(t, dtype=float)
    scale = mod.modulation_index * mod.omega_c_ang**2 / TWO_PI
    if mod.waveform is Waveform.SINE:
        return -scale * np.sin(arg)
    return -scale * np.cos(arg)


def beta(mod: ModulationSpec, rabi_coupling: float) -> float:
    """Dimensionless crossing parameter rabi / (sqrt(index) * f_c).

    Equal to the angular-units ratio Rc_ang / (sqrt(M) * omega_c_ang); the
    2*pi factors cancel, so the caller passes ordinary Hz. Small values mean
    a fast (diabatic) sweep, large values an adiabatic one.
    """
    if mod.modulation_index <= 0.0:
        raise ValidationError("beta is undefined for zero modulation index")
    return rabi_coupling / (math.sqrt(mod.modulation_index) * mod.mod_frequency)


def validate(scenario: Scenario) -> list[ValidationIssue]:
    """Check regime assumptions; hard errors are raised by the spec types.

    Returns warnings for violated validity regimes: the modulation span
    approaching the one-photon width (constant-background assumption), a
    linewidth not well below the one-photon scales, and a probe that is not
    perturbative relative to the coupling.
    """
    issues: list[ValidationIssue] = []
    mod, medium, probe = scenario.modulation, scenario.medium, scenario.probe

    span = mod.modulation_index * mod.mod_frequency
    if span > 0.5 * medium.gamma_eff:
        issues.append(ValidationIssue(
            "warning",
            f"modulation span index*f_c = {span:.4g} Hz is not small against the one-photon "
            f"width {medium.gamma_eff:.4g} Hz; the flat-background assumption degrades"))

    width = eit_linewidth(medium)
    if width > 0.1 * medium.gamma_hom:
        issues.append(ValidationIssue(
            "warning",
            f"EIT linewidth {width:.4g} Hz is not well below the homogeneous width "
            f"{medium.gamma_hom:.4g} Hz"))
    if medium.gamma_doppler > 0 and width > 0.1 * medium.gamma_doppler:
        issues.append(ValidationIssue(
            "warning",
            f"EIT linewidth {width:.4g} Hz is not well below the Doppler width "
            f"{medium.gamma_doppler:.4g} Hz"))

    if probe.rabi_probe > 0.1 * medium.rabi_coupling:
        issues.append(ValidationIssue(
            "warning",
            f"probe Rabi frequency {probe.rabi_probe:.4g} Hz is not perturbative against the "
            f"coupling {medium.rabi_coupling:.4g} Hz"))
    return issues
