"""Brute-force oracle: direct integration of the driven three-level system.

States are ordered (probe ground, coupling ground, excited). The Hamiltonian
is the rotating-wave three-level form with the phase-modulated coupling; the
relaxation damps the optical coherences and the excited population at the
one-photon width, damps the ground coherence at gamma_12, and repopulates the
two ground states symmetrically. That element-wise structure is exactly the
one whose weak-probe steady state reproduces the comb module's single-line
denominator (Gamma and gamma_12 each appearing once).

Rabi convention: fields here are full Hamiltonian Rabi frequencies (matrix
elements are rabi/2, dressed splitting rabi). The medium-level specs use the
transfer-function convention where the squared coupling appears directly in
the power-broadening term; ``from_scenario`` doubles both Rabi frequencies to
bridge the two (adiabatic elimination maps (rabi/2)^2 onto that term).
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    TWO_PI,
    MagneticSpec,
    ModulationSpec,
    NumericsError,
    Scenario,
    TimeGrid,
    ValidationError,
)

_TRACE_TOL = 1e-9
_DEFAULT_CONVERGENCE_TOL = 1e-5
_STEP_RULE = 50.0  # integrator step <= 1/(_STEP_RULE * max frequency scale)


@dataclass(frozen=True)
class ThreeLevelSystem:
    """Parameters of one driven lambda system. All rates in Hz.

    The coupling is rabi_coupling * exp(-i*phi(t)) from ``coupling_on``
    onwards; the probe is rabi_probe inside its square window (or always on).
    ``zeeman_offset`` shifts the two-photon detuning of this channel.
    """

    rabi_probe: float
    rabi_coupling: float
    delta_one_photon: float = 0.0
    delta_two_photon: float = 0.0
    phase_mod: ModulationSpec | None = None
    gamma: float = 1e6  # excited-state / optical-coherence damping, Hz
    gamma_12: float = 0.0  # ground-coherence damping, Hz
    zeeman_offset: float = 0.0
    probe_on: float = 0.0  # s; probe window start
    probe_off: float = math.inf  # s
    coupling_on: float = 0.0  # s

    def __post_init__(self):
        # gamma = 0 is allowed here (unitary-limit checks); medium-level specs
        # still require a strictly positive homogeneous width.
        if self.gamma < 0:
            raise ValidationError("gamma must be >= 0")
        if self.gamma_12 < 0:
            raise ValidationError("gamma_12 must be >= 0")
        if self.rabi_probe < 0 or self.rabi_coupling < 0:
            raise ValidationError("Rabi frequencies must be >= 0")
        if self.max_frequency_scale() <= 0:
            raise ValidationError("at least one rate or frequency must be nonzero")

    def max_frequency_scale(self) -> float:
        """Largest rate/frequency in the problem, Hz (sets the step size)."""
        scales = [self.gamma, self.gamma_12, self.rabi_probe, self.rabi_coupling,
                  abs(self.delta_one_photon), abs(self.delta_two_photon + self.zeeman_offset)]
        if self.phase_mod is not None:
            scales.append(self.phase_mod.modulation_index * self.phase_mod.mod_frequency)
            scales.append(self.phase_mod.mod_frequency)
        return max(scales)


def from_scenario(scenario: Scenario, zeeman_offset: float = 0.0,
                  coupling_on: float = 0.0) -> ThreeLevelSystem:
    """Oracle system describing the same medium as the comb formulas.

    Doubles the probe and coupling Rabi frequencies (convention bridge, see
    module docstring) and damps optical coherences at the full one-photon
    width Gamma + Gamma_D used by the susceptibility module.
    """
    medium, probe = scenario.medium, scenario.probe
    off = math.inf if probe.duration == math.inf else probe.turn_on + probe.duration
    from .model import ProbeShape

    if probe.shape is ProbeShape.CONTINUOUS_WAVE:
        on, off = 0.0, math.inf
    else:
        on = probe.turn_on
    return ThreeLevelSystem(
        rabi_probe=2.0 * probe.rabi_probe * probe.amplitude,
        rabi_coupling=2.0 * medium.rabi_coupling,
        delta_one_photon=probe.delta_one_photon,
        delta_two_photon=probe.delta_two_photon,
        phase_mod=scenario.modulation,
        gamma=medium.gamma_eff,
        gamma_12=medium.gamma_12,
        zeeman_offset=zeeman_offset,
        probe_on=on, probe_off=off, coupling_on=coupling_on)


@dataclass(frozen=True)
class DressedState:
    """Eigenvalues (Hz, angular if inputs were angular) and mixing angle."""

    eps_plus: float
    eps_minus: float
    mixing_angle: float  # radians

    def __post_init__(self):
        if self.eps_plus < self.eps_minus:
            raise ValidationError("eps_plus must be >= eps_minus")


def dressed_eigenvalues(delta2: float, rabi_coupling: float, phi_dot: float) -> DressedState:
    """Closed-form dressed levels of the rotated two-level crossing block.

    Inputs are angular quantities. The block is
    [[delta2 - phi_dot/2, rabi/2], [rabi/2, phi_dot/2]], giving
    eps_pm = delta2/2 +- sqrt(delta2^2 + rabi^2 + phi_dot^2 - 2*phi_dot*delta2)/2
    and tan(2*theta) = phi_dot/rabi (theta = 0 when both vanish).
    """
    root = math.sqrt(delta2**2 + rabi_coupling**2 + phi_dot**2 - 2.0 * phi_dot * delta2)
    mean = 0.5 * delta2
    if rabi_coupling == 0.0 and phi_dot == 0.0:
        theta = 0.0
    else:
        theta = 0.5 * math.atan2(phi_dot, rabi_coupling)
    return DressedState(mean + 0.5 * root, mean - 0.5 * root, theta)


def _coupling_phase(sys: ThreeLevelSystem, t):
    if sys.phase_mod is None:
        return np.zeros_like(np.asarray(t, dtype=float))
    return sys.phase_mod.phase(t)


def bare_hamiltonian(sys: ThreeLevelSystem, t: float) -> np.ndarray:
    """3x3 Hermitian Hamiltonian in angular units (rad/s), lab phase frame."""
    rp = TWO_PI * sys.rabi_probe * (1.0 if sys.probe_on <= t < sys.probe_off else 0.0)
    rc = TWO_PI * sys.rabi_coupling * (1.0 if t >= sys.coupling_on else 0.0)
    rc_t = rc * np.exp(-1j * float(_coupling_phase(sys, t)))
    d2 = TWO_PI * (sys.delta_two_photon + sys.zeeman_offset)
    d1 = TWO_PI * sys.delta_one_photon
    return np.array([
        [0.0, 0.0, 0.5 * rp],
        [0.0, d2, 0.5 * np.conj(rc_t)],
        [0.5 * rp, 0.5 * rc_t, d1],
    ], dtype=complex)


def rotated_hamiltonian(sys: ThreeLevelSystem, t: float) -> np.ndarray:
    """Hamiltonian after absorbing the coupling phase into the basis.

    The coupling element becomes the constant Rabi frequency and the phase
    derivative appears on the diagonal (rad/s).
    """
    rp = TWO_PI * sys.rabi_probe * (1.0 if sys.probe_on <= t < sys.probe_off else 0.0)
    rc = TWO_PI * sys.rabi_coupling * (1.0 if t >= sys.coupling_on else 0.0)
    if sys.phase_mod is None:
        phi_dot = 0.0
    else:
        phi_dot = float(sys.phase_mod.phase_rate_ang(t))
    d2 = TWO_PI * (sys.delta_two_photon + sys.zeeman_offset)
    d1 = TWO_PI * sys.delta_one_photon
    return np.array([
        [0.0, 0.0, 0.5 * rp],
        [0.0, d2 - 0.5 * phi_dot, 0.5 * rc],
        [0.5 * rp, 0.5 * rc, d1 + 0.5 * phi_dot],
    ], dtype=complex)


@dataclass(frozen=True)
class DensityState:
    """3x3 density matrix at one instant."""

    rho: np.ndarray
    time: float

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (3, 3):
            raise ValidationError("density matrix must be 3x3")
        if abs(np.trace(rho).real - 1.0) > 1e-6 or abs(np.trace(rho).imag) > 1e-9:
            raise ValidationError("density matrix must have unit trace")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-9:
            raise ValidationError("density matrix must be Hermitian")


def ground_state() -> DensityState:
    """All population in the probe ground state."""
    rho = np.zeros((3, 3), dtype=complex)
    rho[0, 0] = 1.0
    return DensityState(rho, 0.0)


@dataclass(frozen=True)
class EvolutionResult:
    """Density-matrix series on the requested grid."""

    grid: TimeGrid
    rho: np.ndarray  # complex, shape (grid.count, 3, 3)

    @property
    def probe_coherence(self) -> np.ndarray:
        """rho_13(t): the coherence the probe transmission interrogates."""
        return self.rho[:, 0, 2]

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tii->ti", self.rho))

    def states(self) -> list[DensityState]:
        t = self.grid.values()
        return [DensityState(self.rho[i], float(t[i])) for i in range(self.grid.count)]


# --- Liouvillian assembly (row-major vec; 9x9 blocks) ---------------------

def _commutator_liouvillian(h: np.ndarray) -> np.ndarray:
    eye = np.eye(3)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def _relaxation_liouvillian(gamma_ang: float, gamma12_ang: float) -> np.ndarray:
    r = np.zeros((9, 9))
    idx = lambda i, j: 3 * i + j
    # excited population decays, split equally into the grounds
    r[idx(2, 2), idx(2, 2)] = -gamma_ang
    r[idx(0, 0), idx(2, 2)] = 0.5 * gamma_ang
    r[idx(1, 1), idx(2, 2)] = 0.5 * gamma_ang
    # optical coherences damp at the full one-photon width
    for i, j in ((0, 2), (2, 0), (1, 2), (2, 1)):
        r[idx(i, j), idx(i, j)] = -gamma_ang
    # ground coherence damps at gamma_12
    for i, j in ((0, 1), (1, 0)):
        r[idx(i, j), idx(i, j)] = -gamma12_ang
    return r


def _split_hamiltonian(sys: ThreeLevelSystem):
    """Static part plus probe / cos(phi) / sin(phi) coefficient matrices."""
    d2 = TWO_PI * (sys.delta_two_photon + sys.zeeman_offset)
    d1 = TWO_PI * sys.delta_one_photon
    h_static = np.diag([0.0, d2, d1]).astype(complex)
    rp = TWO_PI * sys.rabi_probe
    h_probe = np.zeros((3, 3), dtype=complex)
    h_probe[0, 2] = h_probe[2, 0] = 0.5 * rp
    rc = TWO_PI * sys.rabi_coupling
    # rc * exp(-i*phi) = rc*cos(phi) - i*rc*sin(phi); H23 = conj/2, H32 = val/2
    h_cos = np.zeros((3, 3), dtype=complex)
    h_cos[1, 2] = h_cos[2, 1] = 0.5 * rc
    h_sin = np.zeros((3, 3), dtype=complex)
    h_sin[1, 2] = 0.5j * rc
    h_sin[2, 1] = -0.5j * rc
    return h_static, h_probe, h_cos, h_sin


def evolve(sys: ThreeLevelSystem, initial: DensityState, grid: TimeGrid,
           convergence_tol: float = _DEFAULT_CONVERGENCE_TOL,
           check_convergence: bool = True) -> EvolutionResult:
    """Integrate the master equation on ``grid`` with fixed-step RK4.

    The grid step must satisfy step <= 1/(50 * max frequency scale). A
    second pass at half step validates convergence of |rho_13| and the
    populations; disagreement beyond ``convergence_tol`` raises NumericsError.
    """
    fmax = sys.max_frequency_scale()
    if grid.step > 1.0 / (_STEP_RULE * fmax) * (1.0 + 1e-12):
        raise ValidationError(
            f"grid step {grid.step:.3e} s too coarse for the fastest scale "
            f"{fmax:.3e} Hz; need <= {1.0 / (_STEP_RULE * fmax):.3e} s")
    out = _integrate(sys, initial, grid, substeps=1)
    if check_convergence:
        fine = _integrate(sys, initial, grid, substeps=2)
        scale = max(np.max(np.abs(out.probe_coherence)), 1e-30)
        dev_c = np.max(np.abs(out.probe_coherence - fine.probe_coherence)) / scale
        dev_p = np.max(np.abs(out.populations - fine.populations))
        if max(dev_c, dev_p) > convergence_tol:
            raise NumericsError(
                f"step-halving check failed: coherence deviation {dev_c:.2e}, population "
                f"deviation {dev_p:.2e}, tolerance {convergence_tol:.2e}; the step "
                f"{grid.step:.3e} s does not resolve the dynamics")
        out = fine
    tr = np.abs(np.einsum("tii->t", out.rho) - 1.0)
    if np.max(tr) > _TRACE_TOL:
        raise NumericsError(f"trace drifted by {np.max(tr):.2e} (> {_TRACE_TOL})")
    return out


def _integrate(sys: ThreeLevelSystem, initial: DensityState, grid: TimeGrid,
               substeps: int) -> EvolutionResult:
    h_static, h_probe, h_cos, h_sin = _split_hamiltonian(sys)
    l_static = (_commutator_liouvillian(h_static)
                + _relaxation_liouvillian(TWO_PI * sys.gamma, TWO_PI * sys.gamma_12))
    l_probe = _commutator_liouvillian(h_probe)
    l_cos = _commutator_liouvillian(h_cos)
    l_sin = _commutator_liouvillian(h_sin)

    n_out = grid.count
    h = grid.step / substeps
    n_steps = (n_out - 1) * substeps
    # sample times for RK4: t, t+h/2, t+h for every step
    t_nodes = grid.start + h * np.arange(n_steps + 1)
    t_half = t_nodes[:-1] + 0.5 * h
    phi_nodes = _coupling_phase(sys, t_nodes)
    phi_half = _coupling_phase(sys, t_half)
    # envelope switches are held constant across each step (status taken at
    # the step midpoint), so the integrated right-hand side stays smooth
    # inside every step; switch times are thereby quantized to the step
    probe_status = (sys.probe_on <= t_half) & (t_half < sys.probe_off)
    coupling_status = t_half >= sys.coupling_on

    def l_of(phi: float, probe_on: bool, coupling_on: bool) -> np.ndarray:
        m = l_static.copy()
        if probe_on:
            m += l_probe
        if coupling_on:
            m += math.cos(phi) * l_cos + math.sin(phi) * l_sin
        return m

    rho = np.asarray(initial.rho, dtype=complex).reshape(9).copy()
    out = np.empty((n_out, 3, 3), dtype=complex)
    out[0] = rho.reshape(3, 3)
    for step in range(n_steps):
        p_on = bool(probe_status[step])
        c_on = bool(coupling_status[step])
        l0 = l_of(phi_nodes[step], p_on, c_on)
        lh = l_of(phi_half[step], p_on, c_on)
        l1 = l_of(phi_nodes[step + 1], p_on, c_on)
        k1 = l0 @ rho
        k2 = lh @ (rho + 0.5 * h * k1)
        k3 = lh @ (rho + 0.5 * h * k2)
        k4 = l1 @ (rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (step + 1) % substeps == 0:
            out[(step + 1) // substeps] = rho.reshape(3, 3)
    return EvolutionResult(grid, out)


def oracle_probe_trace(sys: ThreeLevelSystem, grid: TimeGrid,
                       convergence_tol: float = _DEFAULT_CONVERGENCE_TOL,
                       check_convergence: bool = True) -> np.ndarray:
    """rho_13(t) on a coarse output grid, integrating on internal substeps.

    Convenience for comparisons against synthesized traces whose grids are
    far coarser than the integrator needs.
    """
    fmax = sys.max_frequency_scale()
    sub = max(1, math.ceil(grid.step * _STEP_RULE * fmax))
    res = _integrate(sys, ground_state(), grid, substeps=sub)
    if check_convergence:
        fine = _integrate(sys, ground_state(), grid, substeps=2 * sub)
        scale = max(np.max(np.abs(res.probe_coherence)), 1e-30)
        dev = np.max(np.abs(res.probe_coherence - fine.probe_coherence)) / scale
        if dev > convergence_tol:
            raise NumericsError(
                f"step-halving check failed on the oracle trace: {dev:.2e} > {convergence_tol:.2e}")
        res = fine
    return res.probe_coherence


def magnetic_subsystems(sys: ThreeLevelSystem, magnetic: MagneticSpec) -> list[ThreeLevelSystem]:
    """The three delta_m channels as independent systems."""
    return [replace(sys, zeeman_offset=sys.zeeman_offset + magnetic.zeeman_shift(dm))
            for dm, _ in magnetic.channels]


def magnetic_probe_trace(sys: ThreeLevelSystem, magnetic: MagneticSpec, grid: TimeGrid,
                         convergence_tol: float = _DEFAULT_CONVERGENCE_TOL) -> np.ndarray:
    """Weight-summed rho_13 over the three delta_m channels."""
    weights = [w for _, w in magnetic.channels]
    total = np.zeros(grid.count, dtype=complex)
    for sub, w in zip(magnetic_subsystems(sys, magnetic), weights):
        total += w * oracle_probe_trace(sub, grid, convergence_tol)
    return total
