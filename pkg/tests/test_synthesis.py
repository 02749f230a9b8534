import math

import numpy as np
import pytest

from eitcomb.bessel import sideband_set
from eitcomb.model import (
    MagneticSpec,
    MediumSpec,
    ModulationSpec,
    ProbeShape,
    ProbeSpec,
    Scenario,
    TimeGrid,
    ValidationError,
)
from eitcomb.susceptibility import chi_time, single_line_chi
from eitcomb.synthesis import (
    cw_periodic_trace,
    default_time_grid,
    integrated_spectrum,
    probe_envelope,
    probe_spectrum,
    settle_time,
    sweep_map,
    transmit,
)
from eitcomb.analysis import transient_frequency


class TestProbeSpectrum:
    def test_cw_single_bin(self):
        probe = ProbeSpec(shape=ProbeShape.CONTINUOUS_WAVE, amplitude=2.0, rabi_probe=1.0)
        grid = TimeGrid(0.0, 1e-6, 1024)
        freqs, spec = probe_spectrum(probe, grid)
        nonzero = np.nonzero(np.abs(spec) > 1e-12 * np.max(np.abs(spec)))[0]
        assert len(nonzero) == 1
        assert freqs[nonzero[0]] == 0.0

    def test_square_pulse_sinc_nulls(self):
        grid = TimeGrid(0.0, 1e-6, 1024)
        duration = 256e-6  # window/4: nulls land exactly on bins
        probe = ProbeSpec(shape=ProbeShape.SQUARE_PULSE, amplitude=1.0, turn_on=0.0,
                          duration=duration, rabi_probe=1.0)
        freqs, spec = probe_spectrum(probe, grid)
        peak = np.max(np.abs(spec))
        for k in (1, 2, 3):
            idx = np.argmin(np.abs(freqs - k / duration))
            assert np.abs(spec[idx]) < 1e-10 * peak

    def test_parseval(self):
        grid = TimeGrid(0.0, 2e-6, 800)
        probe = ProbeSpec(shape=ProbeShape.SQUARE_PULSE, amplitude=1.3, turn_on=1e-4,
                          duration=6e-4, rabi_probe=1.0)
        freqs, spec = probe_spectrum(probe, grid)
        env = probe_envelope(probe, grid)
        lhs = np.sum(np.abs(spec) ** 2) * (freqs[1] - freqs[0])
        rhs = np.sum(env**2) * grid.step
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_pulse_exceeding_window_rejected(self):
        grid = TimeGrid(0.0, 1e-6, 256)
        probe = ProbeSpec(shape=ProbeShape.SQUARE_PULSE, turn_on=1e-4, duration=3e-4,
                          rabi_probe=1.0)
        with pytest.raises(ValidationError):
            probe_spectrum(probe, grid)


class TestTransmit:
    def test_bypass_round_trip(self, op_medium, op_modulation, op_probe):
        grid = default_time_grid(op_modulation, op_medium, op_probe)
        trace = transmit(op_probe, op_medium, op_modulation, grid=grid, bypass_medium=True)
        env = probe_envelope(op_probe, grid)
        assert np.max(np.abs(trace.amplitude - env)) < 1e-12

    def test_m0_cw_steady_state(self, op_medium):
        mod = ModulationSpec(0.0, 5e3)
        probe = ProbeSpec(shape=ProbeShape.CONTINUOUS_WAVE, amplitude=1.0, rabi_probe=1.0)
        grid = default_time_grid(mod, op_medium, probe)
        trace = transmit(probe, op_medium, mod, grid=grid)
        expected = single_line_chi(op_medium, 0.0, 0.0)
        assert np.max(np.abs(trace.amplitude - expected)) <= 1e-12 * abs(expected)

    def test_accumulation_orders_agree(self, op_medium, op_modulation, op_probe):
        grid = default_time_grid(op_modulation, op_medium, op_probe)
        a = transmit(op_probe, op_medium, op_modulation, grid=grid)
        b = transmit(op_probe, op_medium, op_modulation, grid=grid, per_sideband=True)
        scale = np.max(np.abs(a.amplitude))
        assert np.max(np.abs(a.amplitude - b.amplitude)) <= 1e-11 * scale

    def test_linear_in_probe_amplitude(self, op_medium, op_modulation, op_probe):
        from dataclasses import replace

        grid = default_time_grid(op_modulation, op_medium, op_probe)
        a = transmit(op_probe, op_medium, op_modulation, grid=grid)
        b = transmit(replace(op_probe, amplitude=2.5), op_medium, op_modulation, grid=grid)
        scale = np.max(np.abs(a.amplitude))
        assert np.max(np.abs(b.amplitude - 2.5 * a.amplitude)) <= 1e-12 * scale

    def test_incommensurate_window_rejected(self, op_medium, op_modulation, op_probe):
        grid = TimeGrid(0.0, 1.7e-6, 971)  # not an integer number of periods
        with pytest.raises(ValidationError):
            transmit(op_probe, op_medium, op_modulation, grid=grid)

    def test_short_window_rejected(self, op_medium, op_modulation):
        probe = ProbeSpec(shape=ProbeShape.SQUARE_PULSE, turn_on=0.0, duration=3.9e-4,
                          rabi_probe=1.0)
        grid = TimeGrid(0.0, 4e-4 / 256, 256)  # exactly two periods, no decay room
        with pytest.raises(ValidationError):
            transmit(probe, op_medium, op_modulation, grid=grid)

    def test_trace_invariants(self, op_medium, op_modulation, op_probe):
        grid = default_time_grid(op_modulation, op_medium, op_probe)
        sb = sideband_set(op_modulation)
        trace = transmit(op_probe, op_medium, op_modulation, grid=grid, sidebands=sb)
        assert np.all(np.isfinite(trace.amplitude))
        # pointwise output bounded by input peak times the transfer maximum
        t_sample = np.linspace(0.0, 1 / op_modulation.mod_frequency, 64)
        omega = np.linspace(-0.5 / grid.step, 0.5 / grid.step, 33)
        chi_max = max(np.max(np.abs(chi_time(op_medium, op_modulation, sb,
                                             omega_k, omega_k, t_sample)))
                      for omega_k in omega)
        assert np.max(np.abs(trace.amplitude)) <= np.max(np.abs(
            probe_envelope(op_probe, grid))) * chi_max * (1 + 1e-9)

    def test_ringing_at_detuning_after_probe_step(self, op_medium):
        # single line, probe stepped on, two-photon detuning 100 kHz: the
        # turn-on transient rings at the detuning. The broadband step edge is
        # removed by subtracting the exact coupling-free response, leaving
        # the transparency line's free decay.
        mod = ModulationSpec(0.0, 5e3)
        probe = ProbeSpec(shape=ProbeShape.SQUARE_PULSE, amplitude=1.0, turn_on=1e-4,
                          duration=1.2e-3, rabi_probe=1.0, delta_two_photon=1e5)
        bg_medium = MediumSpec(gamma_hom=op_medium.gamma_hom, gamma_doppler=0.0,
                               gamma_12=op_medium.gamma_12, rabi_coupling=1e-30)
        grid = default_time_grid(mod, op_medium, probe)
        full = transmit(probe, op_medium, mod, grid=grid)
        bg = transmit(probe, bg_medium, mod, grid=grid)
        beat = np.abs(full.amplitude) - np.abs(bg.amplitude)
        from eitcomb.synthesis import TimeTrace

        trace = TimeTrace(grid, beat.astype(complex), {})
        freq = transient_frequency(trace, (probe.turn_on + 5e-6, probe.turn_on + 1.2e-4))
        assert freq == pytest.approx(1e5, rel=0.02)


class TestCwPeriodicTrace:
    def test_matches_chi_time(self, op_medium, op_modulation):
        sb = sideband_set(op_modulation)
        trace = cw_periodic_trace(op_medium, op_modulation, sidebands=sb, samples=4096)
        t = trace.grid.values()[::167]
        direct = chi_time(op_medium, op_modulation, sb, 0.0, 0.0, t)
        assert np.max(np.abs(trace.amplitude[::167] - direct)) <= 1e-12 * np.max(np.abs(direct))

    def test_matches_transmit_cw(self, op_medium, op_modulation):
        probe = ProbeSpec(shape=ProbeShape.CONTINUOUS_WAVE, amplitude=1.0, rabi_probe=1.0)
        grid = default_time_grid(op_modulation, op_medium, probe)
        full = transmit(probe, op_medium, op_modulation, grid=grid)
        per_count = round(1 / op_modulation.mod_frequency / grid.step)
        period = cw_periodic_trace(op_medium, op_modulation, samples=per_count)
        stride = period.grid.count // per_count
        assert period.grid.count % per_count == 0
        common = period.amplitude[::stride]
        assert np.max(np.abs(full.amplitude[:per_count] - common)) <= 1e-10 * np.max(
            np.abs(common))


class TestSweepMap:
    def test_rows_match_individual_transmits(self, op_scenario):
        values = np.array([-5e4, 0.0, 7.5e4])
        result = sweep_map(op_scenario, "two_photon_detuning", values)
        from dataclasses import replace

        for i, v in enumerate(values):
            probe = replace(op_scenario.probe, delta_two_photon=float(v))
            tr = transmit(probe, op_scenario.medium, op_scenario.modulation,
                          grid=result.time_grid)
            assert np.array_equal(result.values[i], np.abs(tr.amplitude))

    def test_thread_determinism(self, op_scenario):
        values = np.linspace(-1e5, 1e5, 9)
        serial = sweep_map(op_scenario, "two_photon_detuning", values, threads=1)
        threaded = sweep_map(op_scenario, "two_photon_detuning", values, threads=4)
        assert np.array_equal(serial.values, threaded.values)

    def test_intensity_mode(self, op_scenario):
        values = np.array([0.0, 5e4])
        amp = sweep_map(op_scenario, "two_photon_detuning", values, observable="amplitude")
        inten = sweep_map(op_scenario, "two_photon_detuning", values, observable="intensity")
        assert np.allclose(inten.values, amp.values**2, rtol=1e-12)
        assert inten.metadata["observable"] == "intensity"

    def test_magnetic_sweep_needs_spec(self, op_scenario):
        with pytest.raises(ValidationError):
            sweep_map(op_scenario, "magnetic_field", [0.0, 0.01])

    def test_unknown_kind_rejected(self, op_scenario):
        with pytest.raises(ValidationError):
            sweep_map(op_scenario, "one_photon", [0.0])

    def test_magnetic_loci(self, op_medium):
        # the delta_m = 0 channel keeps its pulse time while +-2 channels move
        mod = ModulationSpec(10.0, 2e3)
        probe = ProbeSpec(shape=ProbeShape.CONTINUOUS_WAVE, amplitude=1.0, rabi_probe=1.0)
        mag = MagneticSpec(field=0.0)
        scen = Scenario(mod, op_medium, probe, mag)
        # fields where the +-2 channel crossings sit well away from T/4
        fields = np.array([0.0, 10e-3, 13e-3])
        result = sweep_map(scen, "magnetic_field", fields)
        t = result.time_grid.values()
        period = 1 / mod.mod_frequency
        one = (t >= 0.05 * period) & (t <= 0.45 * period)  # around the first crossing
        # the deepest transparency feature belongs to the field-insensitive
        # delta_m = 0 channel, so its time must not move with the field
        t_mins = [t[one][np.argmin(row[one])] for row in result.values]
        assert max(t_mins) - min(t_mins) <= 3.0 * result.time_grid.step


class TestIntegratedSpectrum:
    def test_constant_map(self, op_scenario):
        values = np.array([0.0, 1e4])
        m = sweep_map(op_scenario, "two_photon_detuning", values)
        flat = m.values * 0 + 2.0
        from eitcomb.synthesis import SweepMap2D

        const = SweepMap2D(m.row_axis, m.row_label, m.time_grid, flat, m.metadata)
        integ = integrated_spectrum(const)
        expected = 2.0 * m.time_grid.step * (m.time_grid.count - 1)
        assert np.allclose(integ, expected, rtol=1e-12)

    def test_settle_time_value(self, op_medium):
        assert settle_time(op_medium) == pytest.approx(3 / (2 * math.pi * 14e3), rel=1e-12)
