"""Transient characterization and magnetometry estimators.

Peak finding and exponential decay fits for the post-crossing ringing, the
decay-time-vs-adiabaticity curve, the unambiguous field range, correlation
template matching for field estimation, and the sensitivity formulas.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar, physical_constants
from scipy.signal import find_peaks

from .bessel import sideband_set
from .model import (
    TWO_PI,
    AmbiguityError,
    MediumSpec,
    ModulationSpec,
    Scenario,
    ValidationError,
    eit_linewidth,
    instantaneous_frequency,
)
from .susceptibility import single_line_chi
from .synthesis import TimeTrace, cw_periodic_trace

_BOHR_MAGNETON = physical_constants["Bohr magneton"][0]  # J/T
_TESLA_PER_GAUSS = 1e-4

# Regime classification thresholds on f_c / gamma_EIT.
_ADIABATIC_BELOW = 0.2
_NONADIABATIC_ABOVE = 5.0


@dataclass(frozen=True)
class TransitionMetrics:
    """Fitted ringing decay and regime label for one crossing scenario."""

    beta: float
    tau: float  # s
    regime: str  # "adiabatic" | "intermediate" | "nonadiabatic"
    fit_quality: float  # R^2 of the log-linear fit

    def __post_init__(self):
        if not (self.tau > 0):
            raise ValidationError("tau must be positive")
        if not (-1e-9 <= self.fit_quality <= 1.0 + 1e-9) and math.isfinite(self.fit_quality):
            raise ValidationError("fit quality must be an R^2 in [0, 1]")


def classify_regime(mod: ModulationSpec, medium: MediumSpec) -> str:
    """Modulation speed relative to the EIT linewidth."""
    ratio = mod.mod_frequency / eit_linewidth(medium)
    if ratio < _ADIABATIC_BELOW:
        return "adiabatic"
    if ratio > _NONADIABATIC_ABOVE:
        return "nonadiabatic"
    return "intermediate"


def find_ringing_peaks(trace: TimeTrace, window: tuple[float, float],
                       floor_factor: float = 3.0) -> list[tuple[float, float]]:
    """Local maxima of |p(t)| above the noise floor inside ``window``.

    The floor is ``floor_factor`` times the median absolute deviation of the
    median-detrended magnitude. Peaks are (time, magnitude) sorted by time;
    magnitudes are the raw trace values, so subtract any static background
    beforehand when absolute decay amplitudes matter.
    """
    t0, t1 = window
    t = trace.grid.values()
    if t0 < t[0] - 1e-15 or t1 > t[-1] + 1e-15 or not (t1 > t0):
        raise ValidationError(f"window ({t0:.4g}, {t1:.4g}) s not inside the trace")
    sel = (t >= t0) & (t <= t1)
    mag = np.abs(trace.amplitude[sel])
    tt = t[sel]
    detrended = mag - np.median(mag)
    mad = np.median(np.abs(detrended - np.median(detrended)))
    idx, _ = find_peaks(detrended, height=floor_factor * mad)
    if len(idx) < 3:
        raise ValidationError(
            f"only {len(idx)} ringing peaks above the noise floor; at least 3 are "
            "needed for a decay fit")
    return [(float(tt[i]), float(mag[i])) for i in idx]


def fit_decay(peaks) -> tuple[float, float]:
    """Exponential decay time from a log-linear fit to peak amplitudes.

    Returns (tau, r_squared). Non-decaying peak sequences (slope >= 0) are
    flagged with tau = +inf.
    """
    pts = list(peaks)
    if len(pts) < 3:
        raise ValidationError(f"need at least 3 peaks, got {len(pts)}")
    t = np.array([p[0] for p in pts], dtype=float)
    a = np.array([p[1] for p in pts], dtype=float)
    if np.any(a <= 0):
        raise ValidationError("peak amplitudes must be positive")
    design = np.vstack([t, np.ones_like(t)]).T
    sol, *_ = np.linalg.lstsq(design, np.log(a), rcond=None)
    resid = np.log(a) - design @ sol
    total = np.log(a) - np.mean(np.log(a))
    ss_tot = float(np.sum(total**2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    slope = float(sol[0])
    tau = math.inf if slope >= 0 else -1.0 / slope
    return tau, r2


def transient_frequency(trace: TimeTrace, window: tuple[float, float]) -> float:
    """Dominant ringing frequency of |p(t)| in the window, Hz.

    Median-detrended magnitude, discrete spectrum peak, three-point parabolic
    interpolation on the log magnitudes.
    """
    t0, t1 = window
    t = trace.grid.values()
    sel = (t >= t0) & (t <= t1)
    if np.count_nonzero(sel) < 16:
        raise ValidationError("window holds too few samples for a frequency estimate")
    mag = np.abs(trace.amplitude[sel])
    x = mag - np.median(mag)
    spec = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(len(x), trace.grid.step)
    if len(spec) < 8:
        raise ValidationError("window too short")
    # skip the decay envelope's low-frequency lobe: search past its first
    # turning point (the lobe magnitude falls monotonically from the origin)
    k_min = 1
    while k_min < len(spec) - 2 and spec[k_min + 1] < spec[k_min]:
        k_min += 1
    searched = spec[k_min:-1]
    if len(searched) < 3:
        raise ValidationError("window too short past the envelope lobe")
    floor = np.median(searched) + 3.0 * np.median(np.abs(searched - np.median(searched)))
    k = k_min + int(np.argmax(searched))
    if spec[k] <= floor:
        raise ValidationError("no spectral peak above the noise floor; the trace does not ring")
    if 1 <= k < len(spec) - 1 and spec[k - 1] > 0 and spec[k + 1] > 0:
        la, lb, lc = np.log(spec[k - 1]), np.log(spec[k]), np.log(spec[k + 1])
        denom = la - 2 * lb + lc
        shift = 0.5 * (la - lc) / denom if denom != 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
    else:
        shift = 0.0
    return float(freqs[k] + shift * (freqs[1] - freqs[0]))


def bmax(mod: ModulationSpec, delta_m: int, g_factor: float,
         bohr_magneton_over_h: float = 1.3996) -> float:
    """Widest unambiguous sensing range, Gauss: index*f_c over the channel shift rate.

    Beyond this field the shifted channels never cross the resonance during a
    modulation cycle and the interference pattern disappears.
    """
    if delta_m == 0:
        raise ValidationError("the delta_m = 0 channel is field-insensitive; no range exists")
    if g_factor <= 0:
        raise ValidationError("g factor must be positive")
    return (mod.modulation_index * mod.mod_frequency
            / (abs(delta_m) * bohr_magneton_over_h * 1e6 * g_factor))


# --- decay-time-vs-beta curve ---------------------------------------------

# Reference weighting: the line follows the sweep once the crossing is slow
# on the line's own timescale; gamma_line^2/chirp is that adiabaticity.
_LINE_FOLLOW_GAIN = 5.0
_ENVELOPE_SAMPLES = 96
_ENVELOPE_EFOLDS = 3.5
_WINDOW_PERIODS_PER_DECAY = 16.0


@dataclass(frozen=True)
class DecayCurvePoint:
    beta: float
    modulation_index: float
    mod_frequency: float
    tau: float
    fit_quality: float


def _decay_modulation_for(beta_value: float, rabi_gap: float, medium: MediumSpec,
                          tau_plateau: float) -> ModulationSpec:
    tau_guess = tau_plateau * max(1.0, 0.8 * beta_value)
    f_c = 1.0 / (_WINDOW_PERIODS_PER_DECAY * tau_guess)
    f_floor = rabi_gap**2 / (0.5 * medium.gamma_eff * beta_value**2)
    if f_floor > f_c:
        raise ValidationError(
            f"beta = {beta_value:.3g} is unreachable with coupling gap {rabi_gap:.4g} Hz: "
            f"the sweep span would dominate the one-photon width")
    m_index = (rabi_gap / (beta_value * f_c))**2
    return ModulationSpec(m_index, f_c)


def ringing_decay_time(medium: MediumSpec, mod: ModulationSpec,
                       rabi_gap: float) -> tuple[float, float]:
    """Decay time of the post-crossing ringing for one modulation setting.

    One steady continuous-probe period is synthesized on resonance together
    with a reference trace (the exact coupling-free background plus the
    adiabatically followed transparency line, weighted by the line-crossing
    adiabaticity). The magnitude of the complex difference is the ringing
    envelope; its log-linear fit over the first few e-folds after a crossing
    gives (tau, r_squared).
    """
    bg_medium = MediumSpec(gamma_hom=medium.gamma_hom, gamma_doppler=medium.gamma_doppler,
                           gamma_12=medium.gamma_12, rabi_coupling=1e-30,
                           alpha=medium.alpha)
    m_index, f_c = mod.modulation_index, mod.mod_frequency
    chirp_ang = m_index * (TWO_PI * f_c)**2
    gamma_line_ang = math.pi * eit_linewidth(medium)
    follow = 1.0 - math.exp(-_LINE_FOLLOW_GAIN * gamma_line_ang**2 / chirp_ang)

    beat_end = m_index * TWO_PI * f_c**2 * (0.25 / f_c)
    samples = int(min(2**21, max(2**15, 8 * beat_end / f_c)))
    sb = sideband_set(mod)
    full = cw_periodic_trace(medium, mod, sidebands=sb, samples=samples)
    background = cw_periodic_trace(bg_medium, mod, sidebands=sb, samples=samples)

    t = full.grid.values()
    f_inst = instantaneous_frequency(mod, t)
    dip = (single_line_chi(medium, f_inst, f_inst)
           - single_line_chi(bg_medium, f_inst, f_inst))
    reference = background.amplitude + np.exp(-1j * mod.phase(t)) * follow * dip
    envelope = np.abs(full.amplitude - reference)

    period = 1.0 / f_c
    skip = min(1.0 / math.sqrt(math.pi * m_index) / f_c, 0.25 / rabi_gap)
    sel = (t >= period / 4 + skip) & (t <= period / 4 + 0.45 * period / 2)
    env, tt = envelope[sel], t[sel] - period / 4
    pick = np.linspace(0, len(env) - 1, _ENVELOPE_SAMPLES).astype(int)
    es, ts = env[pick], tt[pick]
    top = int(np.argmax(es))
    floor = es[top] * math.exp(-_ENVELOPE_EFOLDS)
    below = np.nonzero(es[top:] < floor)[0]
    end = top + (int(below[0]) if len(below) else len(es) - top)
    es, ts = es[top:end], ts[top:end]
    if len(es) < 8:
        raise ValidationError("ringing envelope too short for a decay fit")
    return fit_decay(list(zip(ts, es)))


def decay_vs_beta_curve(medium: MediumSpec, beta_grid, rabi_gap: float | None = None,
                        on_error: str = "raise") -> list[DecayCurvePoint]:
    """Simulated ringing decay time over a grid of crossing parameters.

    For each beta the modulation index and frequency are chosen so the
    half-period comfortably holds the expected decay while the sweep span
    stays small against the one-photon width; the medium (hence the
    linewidth and the coupling gap) is fixed. ``rabi_gap`` defaults to twice
    the medium coupling (the dressed-splitting convention for the gap).
    With on_error="record", failed points carry tau = nan and the run
    continues.
    """
    gap = 2.0 * medium.rabi_coupling if rabi_gap is None else rabi_gap
    tau_plateau = 2.0 / (TWO_PI * eit_linewidth(medium))
    out = []
    for b in beta_grid:
        try:
            mod = _decay_modulation_for(float(b), gap, medium, tau_plateau)
            tau, r2 = ringing_decay_time(medium, mod, gap)
        except (ValidationError, ValueError) as exc:
            if on_error != "record":
                raise
            out.append(DecayCurvePoint(float(b), math.nan, math.nan, math.nan, math.nan))
            continue
        out.append(DecayCurvePoint(float(b), mod.modulation_index, mod.mod_frequency, tau, r2))
    return out


# --- field estimation ------------------------------------------------------

_FLAT_CURVE_SPAN = 1e-3
_MATCH_FLOOR = 0.9
_EDGE_EXACT = 0.995


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    if denom == 0.0:
        return 0.0
    return float(np.dot(da, db)) / denom


def estimate_field(measured: TimeTrace, template_bank: dict,
                   window: tuple[float, float] | None = None) -> tuple[float, np.ndarray]:
    """Correlation-template field estimate.

    ``template_bank`` maps field values (Gauss) to TimeTrace templates on the
    measured trace's grid. Zero-lag Pearson correlation of |p(t)| over the
    analysis window scores every template; the estimate refines the argmax
    with a three-point parabola. Returns (field, correlation curve).

    Raises AmbiguityError when the correlation curve cannot single out a
    field: a flat curve, a best score below an absolute match floor, or a
    best score at the bank edge that is not a near-perfect match (a field
    beyond the bank's range, e.g. past the unambiguous sensing range, lands
    there).
    """
    if len(template_bank) < 3:
        raise ValidationError("template bank must span at least 3 fields")
    fields = np.array(sorted(template_bank), dtype=float)
    t = measured.grid.values()
    if window is None:
        window = (float(t[0]), float(t[-1]))
    sel = (t >= window[0]) & (t <= window[1])
    if np.count_nonzero(sel) < 8:
        raise ValidationError("analysis window holds too few samples")
    m = np.abs(measured.amplitude[sel])

    scores = np.empty(len(fields))
    for i, b in enumerate(fields):
        tmpl = template_bank[float(b)] if float(b) in template_bank else template_bank[b]
        if tmpl.grid != measured.grid:
            raise ValidationError("template grids must match the measured trace")
        scores[i] = _pearson(m, np.abs(tmpl.amplitude[sel]))

    span = float(scores.max() - scores.min())
    if span < _FLAT_CURVE_SPAN:
        raise AmbiguityError(
            f"correlation curve is flat (span {span:.2e}); the field is not identifiable")
    k = int(np.argmax(scores))
    best = float(scores[k])
    if best < _MATCH_FLOOR:
        raise AmbiguityError(
            f"best template correlation {best:.3f} is below the match floor "
            f"{_MATCH_FLOOR}; the trace matches no in-range field")
    if k == 0 or k == len(fields) - 1:
        if best >= _EDGE_EXACT:
            return float(fields[k]), scores
        raise AmbiguityError(
            f"best match sits at the bank edge ({fields[k]:.4g} G) with correlation "
            f"{best:.3f}; the field lies outside the bank's range")
    # three-point parabolic refinement around the maximum
    ya, yb, yc = scores[k - 1], scores[k], scores[k + 1]
    denom = ya - 2 * yb + yc
    shift = 0.5 * (ya - yc) / denom if denom != 0 else 0.0
    shift = float(np.clip(shift, -0.5, 0.5))
    step = fields[k + 1] - fields[k] if shift >= 0 else fields[k] - fields[k - 1]
    return float(fields[k] + shift * step), scores


@dataclass(frozen=True)
class SensitivityReport:
    """Magnetic sensitivity summary for one operating point."""

    noise: float  # amplitude units per sqrt(Hz)
    gradient: float  # amplitude units per Gauss
    measurement_time: float  # s
    sensitivity: float  # Gauss per sqrt(Hz)
    ultimate: float  # Gauss per sqrt(Hz)
    b_max: float  # Gauss

    def __post_init__(self):
        for name in ("noise", "gradient", "measurement_time", "sensitivity", "ultimate", "b_max"):
            if not (getattr(self, name) > 0):
                raise ValidationError(f"{name} must be positive")


def sensitivity(noise: float, gradient: float, measurement_time: float) -> float:
    """sqrt(t) * noise / gradient: field resolution per root bandwidth, Gauss/sqrt(Hz)."""
    if gradient <= 0:
        raise ValidationError("gradient must be positive")
    if noise < 0 or measurement_time <= 0:
        raise ValidationError("noise must be >= 0 and measurement time > 0")
    return math.sqrt(measurement_time) * noise / gradient


def correlation_gradient(fields: np.ndarray, scores: np.ndarray, b_est: float) -> float:
    """|d(score)/dB| near the estimate, by central difference, per Gauss."""
    fields = np.asarray(fields, dtype=float)
    scores = np.asarray(scores, dtype=float)
    k = int(np.argmin(np.abs(fields - b_est)))
    k = min(max(k, 1), len(fields) - 2)
    num = scores[k + 1] - scores[k - 1]
    den = fields[k + 1] - fields[k - 1]
    return abs(float(num / den))


def ultimate_sensitivity(gamma_eit: float, density: float, volume: float,
                         g_factor: float) -> float:
    """Spin-projection bound (hbar/(mu_B g)) * sqrt(2*pi*gamma_EIT/(N*V)), Gauss/sqrt(Hz)."""
    if min(gamma_eit, density, volume, g_factor) <= 0:
        raise ValidationError("all inputs must be positive")
    tesla = hbar / (_BOHR_MAGNETON * g_factor) * math.sqrt(TWO_PI * gamma_eit / (density * volume))
    return tesla / _TESLA_PER_GAUSS


def characterize_transition(medium: MediumSpec, mod: ModulationSpec,
                            rabi_gap: float | None = None) -> TransitionMetrics:
    """beta, fitted ringing decay time and regime label for one setting."""
    gap = 2.0 * medium.rabi_coupling if rabi_gap is None else rabi_gap
    from .model import beta as beta_of

    tau, r2 = ringing_decay_time(medium, mod, gap)
    return TransitionMetrics(beta_of(mod, gap), tau, classify_regime(mod, medium), r2)
