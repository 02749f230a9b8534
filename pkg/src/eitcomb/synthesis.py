"""Probe-transmission synthesis: per-sideband frequency products, 2-D sweeps.

The transmitted amplitude is assembled sideband by sideband: the probe
spectrum is multiplied by chi_n, inverse-transformed, shifted by the n-th
modulation harmonic and accumulated. On a commensurate grid (an integer
number of modulation periods in the window) the harmonic shift is an exact
circular bin shift, so the whole sum collapses to a single inverse FFT of a
shift-accumulated spectrum; both forms are implemented and agree to roundoff.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.fft import next_fast_len

from .bessel import SidebandSet, harmonic_coefficients
from .model import (
    TWO_PI,
    MagneticSpec,
    MediumSpec,
    ModulationSpec,
    ProbeShape,
    ProbeSpec,
    Scenario,
    TimeGrid,
    ValidationError,
    eit_linewidth,
)
from .susceptibility import _chi_terms, default_sidebands

_COMMENSURATE_TOL = 1e-9
_ORDER_CHUNK = 64


def settle_time(medium: MediumSpec) -> float:
    """Dark-state build-up time 3/(2*pi*gamma_EIT), s."""
    return 3.0 / (TWO_PI * eit_linewidth(medium))


def decay_margin(medium: MediumSpec) -> float:
    """Room to leave for transient decay at the window end, s."""
    return 5.0 / (TWO_PI * eit_linewidth(medium))


@dataclass(frozen=True)
class TimeTrace:
    """Complex probe amplitude on a time grid, plus scenario metadata."""

    grid: TimeGrid
    amplitude: np.ndarray  # complex, shape (grid.count,)
    metadata: dict

    def __post_init__(self):
        if len(self.amplitude) != self.grid.count:
            raise ValidationError("trace length does not match its grid")

    def magnitude(self) -> np.ndarray:
        return np.abs(self.amplitude)


@dataclass(frozen=True)
class SweepMap2D:
    """Sweep-value x time matrix of |p(t)| (or |p|^2, see metadata)."""

    row_axis: np.ndarray
    row_label: str  # "two_photon_detuning_hz" or "field_gauss"
    time_grid: TimeGrid
    values: np.ndarray  # real, shape (len(row_axis), time_grid.count)
    metadata: dict

    def __post_init__(self):
        if self.values.shape != (len(self.row_axis), self.time_grid.count):
            raise ValidationError("map shape does not match its axes")
        if np.any(self.values < 0):
            raise ValidationError("map values must be non-negative")


def probe_envelope(probe: ProbeSpec, grid: TimeGrid) -> np.ndarray:
    """Real probe envelope on the grid (square window or constant)."""
    t = grid.values()
    if probe.shape is ProbeShape.CONTINUOUS_WAVE:
        return np.full(grid.count, probe.amplitude)
    env = np.zeros(grid.count)
    on = (t >= probe.turn_on) & (t < probe.turn_on + probe.duration)
    env[on] = probe.amplitude
    return env


def probe_spectrum(probe: ProbeSpec, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Probe spectrum E_p on the frequency grid paired with ``grid``.

    Returns (frequencies, spectrum), both in ascending frequency order, with
    the continuous-transform normalization (DFT * dt) so that
    sum |E|^2 * df == sum |envelope|^2 * dt (Parseval).
    """
    if probe.shape is ProbeShape.SQUARE_PULSE:
        if probe.turn_on + probe.duration > grid.span + _COMMENSURATE_TOL:
            raise ValidationError(
                f"probe pulse extends to {probe.turn_on + probe.duration:.4g} s, beyond the "
                f"{grid.span:.4g} s window")
    env = probe_envelope(probe, grid)
    spec = np.fft.fft(env) * grid.step
    freqs = np.fft.fftfreq(grid.count, grid.step)
    order = np.argsort(freqs, kind="stable")
    return freqs[order], spec[order]


def default_time_grid(mod: ModulationSpec, medium: MediumSpec, probe: ProbeSpec,
                      magnetic: MagneticSpec | None = None,
                      min_duration: float | None = None,
                      min_span: float | None = None,
                      extra_offsets: float = 0.0) -> TimeGrid:
    """Commensurate time grid resolving both the EIT line and the comb.

    Frequency resolution <= min(gamma_EIT/20, f_c/8); unaliased span at
    least max(4*index*f_c, 20*gamma_EIT) plus room for static detunings and
    Zeeman shifts (``extra_offsets`` widens further, e.g. for sweep ranges).
    """
    width = eit_linewidth(medium)
    t_need = [20.0 / width, 8.0 / mod.mod_frequency]
    if probe.shape is ProbeShape.SQUARE_PULSE:
        t_need.append(probe.turn_on + probe.duration + decay_margin(medium))
    if min_duration is not None:
        t_need.append(min_duration)
    periods = max(1, math.ceil(max(t_need) * mod.mod_frequency - _COMMENSURATE_TOL))
    window = periods / mod.mod_frequency

    span = max(4.0 * mod.modulation_index * mod.mod_frequency, 20.0 * width)
    span += 2.0 * (abs(probe.delta_two_photon) + abs(probe.delta_one_photon))
    if magnetic is not None:
        span += 2.0 * max(abs(magnetic.zeeman_shift(dm)) for dm, _ in magnetic.channels)
    span += 2.0 * abs(extra_offsets)
    if min_span is not None:
        span = max(span, min_span)
    count = next_fast_len(max(int(math.ceil(window * span)), 64))
    return TimeGrid(0.0, window / count, count)


def _modulation_bin(mod: ModulationSpec, grid: TimeGrid) -> int:
    cycles = mod.mod_frequency * grid.span
    m = round(cycles)
    if m < 1 or abs(cycles - m) > _COMMENSURATE_TOL * max(1.0, cycles):
        raise ValidationError(
            f"window of {grid.span:.6g} s holds {cycles:.9g} modulation periods; an integer "
            f"count is required so comb terms do not leak")
    return m


def transmit(probe: ProbeSpec, medium: MediumSpec, mod: ModulationSpec,
             magnetic: MagneticSpec | None = None, grid: TimeGrid | None = None,
             sidebands: SidebandSet | None = None, bypass_medium: bool = False,
             kappa: float | None = None, per_sideband: bool = False) -> TimeTrace:
    """Synthesize the transmitted probe amplitude p(t).

    ``bypass_medium`` replaces the transfer by the identity (round-trip
    debugging). ``kappa`` switches on the thick-medium exponential mapping.
    ``per_sideband`` forces the literal order-by-order accumulation instead
    of the algebraically identical single-pass spectrum assembly.
    """
    if grid is None:
        grid = default_time_grid(mod, medium, probe, magnetic)
    if probe.shape is ProbeShape.SQUARE_PULSE:
        needed = probe.turn_on + probe.duration + decay_margin(medium)
        if grid.span + _COMMENSURATE_TOL < needed:
            raise ValidationError(
                f"time window {grid.span:.4g} s too short;"
                f" need {needed:.4g} s (pulse plus transient decay room)")
    m = _modulation_bin(mod, grid)

    env = probe_envelope(probe, grid)
    spectrum = np.fft.fft(env)
    meta = _trace_metadata(probe, medium, mod, magnetic)
    if bypass_medium:
        out = np.fft.ifft(spectrum)
        return TimeTrace(grid, out, meta | {"bypass_medium": True})

    if sidebands is None:
        sidebands = default_sidebands(mod)
    freqs = np.fft.fftfreq(grid.count, grid.step)
    weights = harmonic_coefficients(sidebands, mod)
    orders = sidebands.orders

    if kappa is not None:
        from .susceptibility import ChiComb, transfer_harmonics
        from .model import FrequencyGrid

        fgrid = FrequencyGrid(float(freqs.min()), 1.0 / grid.span, grid.count)
        chunked = np.empty((len(orders), grid.count), dtype=complex)
        for lo in range(0, len(orders), _ORDER_CHUNK):
            hi = min(lo + _ORDER_CHUNK, len(orders))
            chunked[lo:hi] = _chi_terms(
                medium, mod, weights[lo:hi], orders[lo:hi],
                probe.delta_one_photon + freqs, probe.delta_two_photon + freqs, magnetic)
        comb = ChiComb(sidebands, fgrid, chunked, medium, magnetic)
        transfer = transfer_harmonics(comb, kappa)
        return _assemble(grid, spectrum, transfer, orders, m, meta, per_sideband)

    if per_sideband:
        transfer = np.empty((len(orders), grid.count), dtype=complex)
        for lo in range(0, len(orders), _ORDER_CHUNK):
            hi = min(lo + _ORDER_CHUNK, len(orders))
            transfer[lo:hi] = _chi_terms(
                medium, mod, weights[lo:hi], orders[lo:hi],
                probe.delta_one_photon + freqs, probe.delta_two_photon + freqs, magnetic)
        return _assemble(grid, spectrum, transfer, orders, m, meta, True)

    acc = np.zeros(grid.count, dtype=complex)
    for lo in range(0, len(orders), _ORDER_CHUNK):
        hi = min(lo + _ORDER_CHUNK, len(orders))
        chi = _chi_terms(medium, mod, weights[lo:hi], orders[lo:hi],
                         probe.delta_one_photon + freqs,
                         probe.delta_two_photon + freqs, magnetic)
        chi *= spectrum
        for row, n in zip(chi, orders[lo:hi]):
            shift = (int(n) * m) % grid.count
            acc += np.roll(row, shift)
    out = np.fft.ifft(acc)
    trace = TimeTrace(grid, out, meta)
    _check_finite(trace)
    return trace


def _assemble(grid, spectrum, transfer, orders, m, meta, per_sideband):
    t = grid.values()
    if per_sideband:
        out = np.zeros(grid.count, dtype=complex)
        for row, n in zip(transfer, orders):
            y = np.fft.ifft(spectrum * row)
            out += np.exp(1j * TWO_PI * (int(n) * m / grid.span) * t) * y
    else:
        acc = np.zeros(grid.count, dtype=complex)
        for row, n in zip(transfer, orders):
            acc += np.roll(spectrum * row, (int(n) * m) % grid.count)
        out = np.fft.ifft(acc)
    trace = TimeTrace(grid, out, meta)
    _check_finite(trace)
    return trace


def _check_finite(trace: TimeTrace):
    if not np.all(np.isfinite(trace.amplitude)):
        raise ValidationError("synthesized trace contains non-finite values")


def _trace_metadata(probe, medium, mod, magnetic) -> dict:
    meta = {
        "modulation_index": mod.modulation_index,
        "mod_frequency_hz": mod.mod_frequency,
        "waveform": mod.waveform.value,
        "gamma_hz": medium.gamma_hom,
        "gamma_doppler_hz": medium.gamma_doppler,
        "gamma_12_hz": medium.gamma_12,
        "rabi_coupling_hz": medium.rabi_coupling,
        "alpha": medium.alpha,
        "probe_shape": probe.shape.value,
        "probe_amplitude": probe.amplitude,
        "turn_on_s": probe.turn_on,
        "duration_s": probe.duration,
        "delta_one_photon_hz": probe.delta_one_photon,
        "delta_two_photon_hz": probe.delta_two_photon,
    }
    if magnetic is not None:
        meta["field_gauss"] = magnetic.field
        meta["g_lower"] = magnetic.g_lower
    return meta


VALID_SWEEPS = ("two_photon_detuning", "magnetic_field")


def sweep_map(scenario: Scenario, sweep: str, sweep_values,
              grid: TimeGrid | None = None, observable: str = "amplitude",
              threads: int = 1, sidebands: SidebandSet | None = None,
              kappa: float | None = None) -> SweepMap2D:
    """One transmit row per sweep value; rows are independent.

    ``sweep`` is "two_photon_detuning" (values in Hz) or "magnetic_field"
    (values in Gauss; the scenario must carry a MagneticSpec). The map stores
    |p(t)| for observable "amplitude", |p(t)|^2 for "intensity".
    """
    if sweep not in VALID_SWEEPS:
        raise ValidationError(f"unknown sweep kind {sweep!r}; expected one of {VALID_SWEEPS}")
    if observable not in ("amplitude", "intensity"):
        raise ValidationError(f"unknown observable {observable!r}")
    values = np.asarray(sweep_values, dtype=float)
    if values.ndim != 1 or len(values) < 1:
        raise ValidationError("sweep values must be a non-empty 1-D sequence")

    mod, medium, probe, magnetic = (scenario.modulation, scenario.medium,
                                    scenario.probe, scenario.magnetic)
    if sweep == "magnetic_field" and magnetic is None:
        raise ValidationError("a magnetic sweep needs a MagneticSpec in the scenario")
    if grid is None:
        if sweep == "two_photon_detuning":
            extra = float(np.max(np.abs(values)))
        else:
            probe_mag = replace(magnetic, field=float(np.max(np.abs(values))))
            extra = max(abs(probe_mag.zeeman_shift(dm)) for dm, _ in probe_mag.channels)
        grid = default_time_grid(mod, medium, probe, magnetic, extra_offsets=extra)
    if sidebands is None:
        sidebands = default_sidebands(mod)

    def one_row(value: float) -> np.ndarray:
        if sweep == "two_photon_detuning":
            row_probe, row_mag = replace(probe, delta_two_photon=value), magnetic
        else:
            row_probe, row_mag = probe, replace(magnetic, field=value)
        trace = transmit(row_probe, medium, mod, row_mag, grid,
                         sidebands=sidebands, kappa=kappa)
        mag = trace.magnitude()
        return mag if observable == "amplitude" else mag**2

    rows = np.empty((len(values), grid.count))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, row in enumerate(pool.map(one_row, values)):
                rows[i] = row
    else:
        for i, v in enumerate(values):
            rows[i] = one_row(v)

    label = "two_photon_detuning_hz" if sweep == "two_photon_detuning" else "field_gauss"
    meta = _trace_metadata(probe, medium, mod, magnetic) | {"observable": observable, "sweep": sweep}
    return SweepMap2D(values, label, grid, rows, meta)


def integrated_spectrum(sweep: SweepMap2D) -> np.ndarray:
    """Per-row time integral (trapezoid) of the stored observable."""
    return np.trapezoid(sweep.values, dx=sweep.time_grid.step, axis=1)


def cw_periodic_trace(medium: MediumSpec, mod: ModulationSpec,
                      sidebands: SidebandSet | None = None,
                      delta1: float = 0.0, delta2: float = 0.0,
                      magnetic: MagneticSpec | None = None,
                      samples: int | None = None, amplitude: float = 1.0) -> TimeTrace:
    """One steady modulation period of p(t) for a continuous probe.

    The continuous-wave response is exactly periodic with the harmonic
    weights chi_n evaluated at the probe carrier, so the trace is a single
    inverse FFT of those weights; this stays cheap at modulation indices far
    beyond what the pulse pipeline needs to handle.
    """
    if sidebands is None:
        sidebands = default_sidebands(mod)
    orders = sidebands.orders
    weights = harmonic_coefficients(sidebands, mod)
    coeff = np.empty(len(orders), dtype=complex)
    for lo in range(0, len(orders), 4096):
        hi = min(lo + 4096, len(orders))
        coeff[lo:hi] = _chi_terms(medium, mod, weights[lo:hi], orders[lo:hi],
                                  delta1, delta2, magnetic)
    n_min = 2 * len(orders) + 2
    n_t = next_fast_len(max(samples or 0, n_min))
    spec = np.zeros(n_t, dtype=complex)
    np.add.at(spec, np.mod(orders, n_t), coeff)
    p = np.fft.ifft(spec) * n_t * amplitude
    period = 1.0 / mod.mod_frequency
    grid = TimeGrid(0.0, period / n_t, n_t)
    probe = ProbeSpec(shape=ProbeShape.CONTINUOUS_WAVE, amplitude=amplitude,
                      rabi_probe=1.0, delta_one_photon=delta1, delta_two_photon=delta2)
    meta = _trace_metadata(probe, medium, mod, magnetic) | {"periodic": True}
    trace = TimeTrace(grid, p, meta)
    _check_finite(trace)
    return trace
