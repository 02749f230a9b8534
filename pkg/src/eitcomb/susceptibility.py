"""Modulated EIT transfer function: per-sideband components and time sums.

The modulated medium's response to a probe spectral component at offset
``omega`` from the carrier is a comb of single EIT lines, one per harmonic of
the modulation frequency, weighted by the harmonic coefficients of the
coupling's phase factor:

    chi_n(omega) = i*alpha * w_n / (Gamma_eff - i*(D1 - n*f_c)
                                    + Rc^2 / (gamma_12 - i*(D2 - n*f_c)))

with D1 = delta_one_photon + omega, D2 = delta_two_photon + omega, everything
converted to angular units inside. Gamma_eff = Gamma + Gamma_D: the Doppler
width is treated as a constant extra one-photon broadening so that the
evaluated transparency window always has the width eit_linewidth() reports.
With a magnetic field the two-photon detuning is shifted per delta_m channel
and the channels are weight-summed.
"""

from dataclasses import dataclass

import numpy as np

from .bessel import SidebandSet, harmonic_coefficients, sideband_set
from .model import (
    TWO_PI,
    FrequencyGrid,
    MagneticSpec,
    MediumSpec,
    ModulationSpec,
    ValidationError,
)

# Evaluating exp(i*kappa*chi) (thick-medium extension) re-expands the
# periodic transfer in this many harmonics per retained sideband.
_BEER_LAMBERT_OVERSAMPLE = 4


def _zeeman_offsets_and_weights(magnetic: MagneticSpec | None):
    if magnetic is None:
        return np.array([0.0]), np.array([1.0])
    offsets = np.array([magnetic.zeeman_shift(dm) for dm, _ in magnetic.channels])
    weights = np.array([w for _, w in magnetic.channels])
    return offsets, weights


def _chi_terms(medium: MediumSpec, mod: ModulationSpec, weights_n: np.ndarray,
               orders: np.ndarray, delta1, delta2,
               magnetic: MagneticSpec | None = None) -> np.ndarray:
    """Stacked chi_n evaluated at (delta1 + shift, delta2 + shift) pairs.

    ``orders`` has shape (N_n,), ``delta1``/``delta2`` broadcast against each
    other; the result has shape (N_n,) + broadcast shape. Detunings in Hz.
    """
    d1 = np.asarray(delta1, dtype=float)
    d2 = np.asarray(delta2, dtype=float)
    offs, w_ch = _zeeman_offsets_and_weights(magnetic)

    line = orders.reshape((-1,) + (1,) * max(d1.ndim, d2.ndim)) * mod.mod_frequency
    rc2 = medium.rabi_coupling**2
    out = None
    for off, w in zip(offs, w_ch):
        denom = (medium.gamma_eff - 1j * (d1 - line)
                 + rc2 / (medium.gamma_12 - 1j * (d2 - off - line)))
        term = w / denom
        out = term if out is None else out + term
    # one global angular conversion: denominators in Hz are 1/(2*pi) of the
    # angular ones, and the channel weights already sum to 1; alpha scales
    # last so outputs are exactly linear in it
    chi = (1j / TWO_PI) * out
    chi = chi * weights_n.reshape(line.shape[:1] + (1,) * (chi.ndim - 1))
    return medium.alpha * chi


def chi_component(medium: MediumSpec, mod: ModulationSpec, sidebands: SidebandSet,
                  n: int, delta1: float, delta2: float,
                  magnetic: MagneticSpec | None = None) -> complex:
    """The order-n term of the comb, without its exp(i*n*omega_c*t) factor."""
    if not (sidebands.n_min <= n <= sidebands.n_max):
        raise ValidationError(f"order {n} outside the sideband range")
    w_n = harmonic_coefficients(sidebands, mod)[n - sidebands.n_min]
    val = _chi_terms(medium, mod, np.array([w_n]), np.array([n]),
                     delta1, delta2, magnetic)[0]
    return complex(val)


def chi_time(medium: MediumSpec, mod: ModulationSpec, sidebands: SidebandSet,
             delta1: float, delta2: float, t):
    """Full time-dependent transfer chi(t) at fixed probe detunings.

    Periodic in t with the modulation period. Accepts scalar or array t.
    """
    return chi_time_magnetic(medium, mod, sidebands, None, delta1, delta2, t)


def chi_time_magnetic(medium: MediumSpec, mod: ModulationSpec, sidebands: SidebandSet,
                      magnetic: MagneticSpec | None, delta1: float, delta2: float, t):
    """Weighted delta_m-channel sum of chi_time; equals chi_time at zero field."""
    tt = np.asarray(t, dtype=float)
    orders = sidebands.orders
    weights = harmonic_coefficients(sidebands, mod)
    terms = _chi_terms(medium, mod, weights, orders, delta1, delta2, magnetic)
    phases = np.exp(1j * mod.omega_c_ang * np.outer(np.atleast_1d(tt), orders))
    out = phases @ terms
    return complex(out[0]) if tt.ndim == 0 else out


@dataclass(frozen=True)
class ChiComb:
    """Per-sideband response functions tabulated on a frequency grid.

    ``values[k]`` is chi at order ``sidebands.orders[k]`` evaluated at probe
    offsets ``grid.values()`` (both detunings shifted together, as both move
    with the probe carrier).
    """

    sidebands: SidebandSet
    grid: FrequencyGrid
    values: np.ndarray  # complex, shape (orders, grid.count)
    medium: MediumSpec
    magnetic: MagneticSpec | None = None

    def __post_init__(self):
        if self.values.shape != (len(self.sidebands.orders), self.grid.count):
            raise ValidationError("comb array shape does not match sidebands x grid")


def build_comb(medium: MediumSpec, mod: ModulationSpec, sidebands: SidebandSet,
               grid: FrequencyGrid, delta1: float = 0.0, delta2: float = 0.0,
               magnetic: MagneticSpec | None = None, chunk: int = 64) -> ChiComb:
    """Tabulate chi_n over the grid (order-chunked to bound temporaries)."""
    omega = grid.values()
    orders = sidebands.orders
    weights = harmonic_coefficients(sidebands, mod)
    values = np.empty((len(orders), grid.count), dtype=complex)
    for lo in range(0, len(orders), chunk):
        hi = min(lo + chunk, len(orders))
        values[lo:hi] = _chi_terms(medium, mod, weights[lo:hi], orders[lo:hi],
                                   delta1 + omega, delta2 + omega, magnetic)
    return ChiComb(sidebands, grid, values, medium, magnetic)


def steady_spectrum(medium: MediumSpec, mod: ModulationSpec, sidebands: SidebandSet,
                    grid: FrequencyGrid, magnetic: MagneticSpec | None = None,
                    delta1: float = 0.0, delta2: float = 0.0) -> np.ndarray:
    """Stacked chi_n(omega) for the synthesis stage.

    The grid must span the modulation bandwidth (2 * index * f_c), otherwise
    most comb lines would fall outside the tabulated band.
    """
    needed = 2.0 * mod.modulation_index * mod.mod_frequency
    if grid.span < needed:
        raise ValidationError(
            f"frequency grid span {grid.span:.4g} Hz is below the modulation "
            f"bandwidth {needed:.4g} Hz")
    return build_comb(medium, mod, sidebands, grid, delta1, delta2, magnetic).values


def single_line_chi(medium: MediumSpec, delta1, delta2):
    """Closed-form unmodulated EIT response (the comb's collapse at index 0)."""
    d1 = np.asarray(delta1, dtype=float)
    d2 = np.asarray(delta2, dtype=float)
    denom = (medium.gamma_eff - 1j * d1
             + medium.rabi_coupling**2 / (medium.gamma_12 - 1j * d2))
    out = 1j * medium.alpha / (TWO_PI * denom)
    return complex(out) if out.ndim == 0 else out


def transfer_harmonics(comb: ChiComb, kappa: float | None = None) -> np.ndarray:
    """Harmonic components of the applied transfer function.

    With ``kappa`` unset the bracketed comb itself multiplies the probe
    spectrum (the default model). With ``kappa`` set, the thick-medium
    extension exp(i*kappa*chi(omega, t)) is re-expanded in modulation
    harmonics; components beyond the retained sideband range are discarded.
    """
    if kappa is None:
        return comb.values
    n_orders = len(comb.sidebands.orders)
    n_fft = _BEER_LAMBERT_OVERSAMPLE * n_orders
    # chi(omega, t_j) on one modulation period from its harmonic components
    spec = np.zeros((n_fft, comb.grid.count), dtype=complex)
    ords = comb.sidebands.orders
    spec[np.mod(ords, n_fft)] = comb.values
    chi_t = np.fft.ifft(spec, axis=0) * n_fft
    trans_t = np.exp(1j * kappa * chi_t)
    trans_spec = np.fft.fft(trans_t, axis=0) / n_fft
    return trans_spec[np.mod(ords, n_fft)]


def default_sidebands(mod: ModulationSpec, tolerance: float = 1e-12) -> SidebandSet:
    return sideband_set(mod, tolerance)
