import math

import numpy as np
import pytest

from eitcomb.model import (
    MagneticSpec,
    MediumSpec,
    ModulationSpec,
    ProbeShape,
    ProbeSpec,
    Scenario,
    ValidationError,
    Waveform,
    beta,
    chirp_rate,
    eit_linewidth,
    instantaneous_frequency,
    validate,
)


class TestEitLinewidth:
    def test_coupling_off_limit(self):
        medium = MediumSpec(gamma_hom=1e6, gamma_doppler=0.0, gamma_12=1e3,
                            rabi_coupling=1e-12)
        assert eit_linewidth(medium) == pytest.approx(2e3, rel=1e-9)

    def test_operating_point_14khz(self):
        # gamma_12 = 1 kHz plus a 6 kHz power-broadening term
        medium = MediumSpec(gamma_hom=1e6, gamma_doppler=0.0, gamma_12=1e3,
                            rabi_coupling=math.sqrt(6e3 * 1e6))
        assert eit_linewidth(medium) == pytest.approx(14e3, rel=1e-12)

    def test_hand_evaluated_point(self):
        medium = MediumSpec(gamma_hom=100e6, gamma_doppler=500e6, gamma_12=2e3,
                            rabi_coupling=100e3)
        expected = 2.0 * (2000.0 + 1e10 / 6e8)
        assert eit_linewidth(medium) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(4033.333, rel=1e-6)

    def test_monotonicity(self):
        base = dict(gamma_hom=1e6, gamma_doppler=1e6, gamma_12=1e3, rabi_coupling=5e4)
        w0 = eit_linewidth(MediumSpec(**base))
        assert eit_linewidth(MediumSpec(**{**base, "rabi_coupling": 6e4})) > w0
        assert eit_linewidth(MediumSpec(**{**base, "gamma_12": 2e3})) > w0
        assert eit_linewidth(MediumSpec(**{**base, "gamma_hom": 2e6})) < w0
        assert eit_linewidth(MediumSpec(**{**base, "gamma_doppler": 2e6})) < w0


class TestInstantaneousFrequency:
    def test_sine_extremes(self):
        mod = ModulationSpec(20.0, 5e3)
        assert instantaneous_frequency(mod, 0.0) == pytest.approx(20 * 5e3, rel=1e-12)
        assert instantaneous_frequency(mod, 1 / (4 * 5e3)) == pytest.approx(0.0, abs=1e-6)

    def test_modulation_half_span(self):
        mod = ModulationSpec(20.0, 5e3)
        assert instantaneous_frequency(mod, 0.0) == pytest.approx(1e5, rel=1e-12)

    def test_integrates_back_to_phase(self):
        for waveform in (Waveform.SINE, Waveform.COSINE):
            mod = ModulationSpec(7.5, 3e3, waveform)
            t = np.linspace(0.0, 1 / 3e3, 20001)
            freq = instantaneous_frequency(mod, t)
            phase = mod.phase(t) / (2 * math.pi)
            integrated = phase[0] + np.concatenate(
                [[0.0], np.cumsum((freq[1:] + freq[:-1]) / 2 * np.diff(t))])
            assert np.max(np.abs(integrated - phase)) <= 1e-6 * np.max(np.abs(phase))


class TestChirpRate:
    def test_cosine_at_zero(self):
        mod = ModulationSpec(10.0, 15e3, Waveform.COSINE)
        expected = -10.0 * 15e3 * (2 * math.pi * 15e3)
        assert chirp_rate(mod, 0.0) == pytest.approx(expected, rel=1e-12)

    def test_sine_quarter_period(self):
        mod = ModulationSpec(10.0, 15e3)
        value = chirp_rate(mod, 1 / (4 * 15e3))
        assert abs(value) == pytest.approx(10.0 * 15e3 * 2 * math.pi * 15e3, rel=1e-9)

    def test_peak_angular_chirp(self):
        mod = ModulationSpec(10.0, 15e3)
        peak = abs(chirp_rate(mod, 1 / (4 * 15e3))) * 2 * math.pi
        assert peak == pytest.approx(10 * (2 * math.pi * 15e3) ** 2, rel=1e-9)
        assert peak == pytest.approx(8.883e10, rel=1e-3)


class TestBeta:
    def test_definitional_unity(self):
        mod = ModulationSpec(4.0, 1e4)
        assert beta(mod, 2 * 1e4) == pytest.approx(1.0, rel=1e-12)

    def test_homogeneity(self):
        mod = ModulationSpec(5.0, 2e4)
        b = beta(mod, 3e4)
        assert beta(mod, 6e4) == pytest.approx(2 * b, rel=1e-12)
        assert beta(ModulationSpec(20.0, 2e4), 3e4) == pytest.approx(b / 2, rel=1e-12)

    def test_hand_value(self):
        assert beta(ModulationSpec(20.0, 5e3), 30e3) == pytest.approx(1.342, rel=1e-3)

    def test_scaling_invariance(self):
        mod = ModulationSpec(11.0, 7e3)
        b = beta(mod, 4e4)
        for k in (0.1, 3.0, 17.0):
            assert beta(ModulationSpec(11.0, 7e3 * k), 4e4 * k) == pytest.approx(b, rel=1e-12)

    def test_zero_index_rejected(self):
        with pytest.raises(ValidationError):
            beta(ModulationSpec(0.0, 5e3), 1e4)


class TestSpecs:
    def test_phase_waveforms(self):
        t = np.linspace(0, 1e-3, 101)
        sine = ModulationSpec(3.0, 2e3, Waveform.SINE)
        cosine = ModulationSpec(3.0, 2e3, Waveform.COSINE)
        assert np.allclose(sine.phase(t), 3.0 * np.sin(2 * np.pi * 2e3 * t))
        assert np.allclose(cosine.phase(t), 3.0 * np.cos(2 * np.pi * 2e3 * t))

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValidationError):
            ModulationSpec(-1.0, 5e3)
        with pytest.raises(ValidationError):
            ModulationSpec(1.0, 0.0)
        with pytest.raises(ValidationError):
            MediumSpec(gamma_hom=0.0, gamma_doppler=0.0, gamma_12=1.0, rabi_coupling=1.0)
        with pytest.raises(ValidationError):
            MediumSpec(gamma_hom=1.0, gamma_doppler=0.0, gamma_12=-1.0, rabi_coupling=1.0)
        with pytest.raises(ValidationError):
            ProbeSpec(shape=ProbeShape.SQUARE_PULSE, duration=0.0)

    def test_magnetic_channels(self):
        mag = MagneticSpec(field=0.05)
        assert mag.zeeman_shift(2) == pytest.approx(69980.0, rel=1e-12)
        assert mag.zeeman_shift(-2) == pytest.approx(-mag.zeeman_shift(2), rel=1e-12)
        assert mag.zeeman_shift(0) == 0.0
        # channel separation between the +-2 lines
        assert mag.zeeman_shift(2) - mag.zeeman_shift(-2) == pytest.approx(139960.0, rel=1e-12)
        with pytest.raises(ValidationError):
            MagneticSpec(field=0.0, channels=((-2, 0.5), (0, 0.5)))
        with pytest.raises(ValidationError):
            MagneticSpec(field=0.0, channels=((-2, 0.3), (0, 0.3), (2, 0.3)))
        with pytest.raises(ValidationError):
            MagneticSpec(field=0.0, channels=((-1, 0.25), (0, 0.5), (2, 0.25)))

    def test_purity_bit_identical(self):
        mod = ModulationSpec(12.0, 4e3)
        t = np.linspace(0, 5e-4, 777)
        assert np.array_equal(mod.phase(t), mod.phase(t))
        assert np.array_equal(chirp_rate(mod, t), chirp_rate(mod, t))


class TestValidate:
    def test_defaults_clean(self, op_scenario):
        assert validate(op_scenario) == []

    def test_span_warning(self):
        medium = MediumSpec(gamma_hom=100e6, gamma_doppler=0.0, gamma_12=1e3,
                            rabi_coupling=1e6)
        mod = ModulationSpec(40.0, 5e6)  # span 200 MHz vs Gamma 100 MHz
        scen = Scenario(mod, medium, ProbeSpec(rabi_probe=1e4))
        messages = [i.message for i in validate(scen)]
        assert any("span" in m for m in messages)

    def test_probe_strength_warning(self, op_medium, op_modulation):
        probe = ProbeSpec(rabi_probe=op_medium.rabi_coupling / 2)
        scen = Scenario(op_modulation, op_medium, probe)
        assert any("perturbative" in i.message for i in validate(scen))
