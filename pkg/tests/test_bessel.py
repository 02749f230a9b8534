import math

import numpy as np
import pytest

from eitcomb.bessel import (
    SidebandSet,
    bessel_j,
    bessel_j_sequence,
    harmonic_coefficients,
    reconstruct_phase_factor,
    sideband_set,
    truncation_order,
)
from eitcomb.model import ModulationSpec, Waveform


def series_oracle(n: int, x: float, terms: int = 80) -> float:
    """Independent ascending power series sum_k (-1)^k (x/2)^(n+2k)/(k!(n+k)!)."""
    total = 0.0
    for k in range(terms):
        total += (-1.0) ** k * (x / 2.0) ** (n + 2 * k) / (
            math.factorial(k) * math.factorial(n + k))
    return total


class TestBesselJ:
    def test_zero_argument(self):
        assert bessel_j(0, 0.0) == 1.0
        for n in (1, 2, 7, 300):
            assert bessel_j(n, 0.0) == 0.0

    def test_parity_identities(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            n = int(rng.integers(0, 80))
            x = float(rng.uniform(0.1, 400.0))
            assert bessel_j(n, -x) == pytest.approx((-1.0) ** n * bessel_j(n, x), rel=1e-12, abs=1e-300)
            assert bessel_j(-n, x) == pytest.approx((-1.0) ** n * bessel_j(n, x), rel=1e-12, abs=1e-300)

    def test_against_power_series(self):
        # J_2(1.0) and neighbours against the independent series oracle
        assert abs(bessel_j(2, 1.0) - series_oracle(2, 1.0)) <= 1e-12
        for n, x in ((0, 0.7), (1, 2.3), (3, 5.0), (5, 11.5), (12, 14.0), (25, 18.0)):
            assert abs(bessel_j(n, x) - series_oracle(n, x)) <= 1e-11

    def test_against_scipy(self):
        from scipy.special import jv

        rng = np.random.default_rng(5)
        for _ in range(120):
            n = int(rng.integers(0, 1000))
            x = float(rng.uniform(-1000.0, 1000.0))
            ref = float(jv(n, x))
            got = bessel_j(n, x)
            if abs(ref) > 1e-280:
                assert got == pytest.approx(ref, rel=1e-10, abs=1e-13)

    def test_recurrence_consistency(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            n = int(rng.integers(1, 60))
            x = float(rng.uniform(1.0, 120.0))
            lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x)
            rhs = 2 * n / x * bessel_j(n, x)
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)

    def test_order_bound(self):
        with pytest.raises(ValueError):
            bessel_j(10**6 + 1, 1.0)
        with pytest.raises(ValueError):
            bessel_j(1, math.inf)

    def test_sequence_matches_scalar(self):
        seq = bessel_j_sequence(37.5, 60)
        for n in (0, 1, 13, 42, 60):
            assert seq[n] == pytest.approx(bessel_j(n, 37.5), rel=1e-12, abs=1e-300)


class TestSidebandSet:
    @pytest.mark.parametrize("m", [0.5, 6, 10, 20, 40, 200, 240])
    def test_completeness(self, m):
        sb = sideband_set(ModulationSpec(float(m), 1e3))
        assert sb.completeness_defect <= 1e-12
        assert sb.n_max >= truncation_order(float(m))

    def test_zero_index(self):
        sb = sideband_set(ModulationSpec(0.0, 1e3))
        assert sb.n_min == sb.n_max == 0
        assert sb.coefficients[0] == 1.0

    def test_large_index_no_overflow(self):
        sb = sideband_set(ModulationSpec(240.0, 625.0))
        assert np.all(np.isfinite(sb.coefficients))
        assert sb.n_max >= 313

    def test_coefficient_parity(self):
        sb = sideband_set(ModulationSpec(9.0, 1e3))
        for n in range(0, sb.n_max + 1):
            assert sb.coefficient(-n) == pytest.approx(
                (-1.0) ** n * sb.coefficient(n), rel=1e-12, abs=1e-300)

    def test_tolerance_domain(self):
        with pytest.raises(ValueError):
            sideband_set(ModulationSpec(5.0, 1e3), tolerance=0.0)
        with pytest.raises(ValueError):
            sideband_set(ModulationSpec(5.0, 1e3), tolerance=1e-2)


class TestReconstruction:
    def test_zero_index_identity(self):
        mod = ModulationSpec(0.0, 5e3)
        sb = sideband_set(mod)
        for t in (0.0, 1.7e-4, 9e-4):
            assert reconstruct_phase_factor(sb, mod, t) == pytest.approx(1.0 + 0.0j)

    def test_time_zero_sine(self):
        mod = ModulationSpec(20.0, 5e3)
        sb = sideband_set(mod)
        assert reconstruct_phase_factor(sb, mod, 0.0) == pytest.approx(1.0 + 0.0j, abs=1e-11)

    @pytest.mark.parametrize("m", [0.5, 6, 10, 20, 40, 200, 240])
    @pytest.mark.parametrize("waveform", [Waveform.SINE, Waveform.COSINE])
    def test_reconstruction_error(self, m, waveform):
        mod = ModulationSpec(float(m), 5e3, waveform)
        sb = sideband_set(mod)
        t = np.linspace(0.0, 1 / 5e3, 1024, endpoint=False)
        rec = reconstruct_phase_factor(sb, mod, t)
        exact = np.exp(-1j * mod.phase(t))
        assert np.max(np.abs(rec - exact)) < 1e-9
        assert np.max(np.abs(np.abs(rec) - 1.0)) < 1e-9

    def test_unit_modulus_preserved(self):
        mod = ModulationSpec(20.0, 5e3)
        coeff = harmonic_coefficients(sideband_set(mod), mod)
        assert np.sum(np.abs(coeff) ** 2) == pytest.approx(1.0, abs=1e-12)
