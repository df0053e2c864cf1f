import cmath
import math

import numpy as np
import pytest

from uclab.scalar import (WeightFunction, carleman_weight, mu, mu_log, phi_ab,
                          phi_ab_derivatives, principal_sqrt)


class TestPrincipalSqrt:
    def test_positive_real(self):
        assert principal_sqrt(4.0) == 2.0

    def test_negative_real_lands_on_positive_imaginary_axis(self):
        assert principal_sqrt(-1.0) == 1j
        z = principal_sqrt(-9.0)
        assert z.real == 0.0 and z.imag == 3.0

    def test_two_i(self):
        w = principal_sqrt(2j)
        # oracle: direct multiplication
        assert abs(w * w - 2j) < 1e-15
        assert abs(w - (1 + 1j)) < 1e-15

    def test_roundtrip_random(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal(100000) + 1j * rng.standard_normal(100000)
        z *= np.exp(rng.uniform(-8, 8, z.size))
        for zi in z[:: max(1, z.size // 100000)]:
            w = principal_sqrt(complex(zi))
            assert abs(w * w - zi) <= 8 * np.finfo(float).eps * abs(zi)
            assert w.real >= 0.0


class TestMu:
    def test_lambda_zero_is_one(self):
        for n in (1, 10, 1000):
            assert mu(n, 0.0, 5.0) == 1.0 + 0.0j

    def test_r_zero_is_one(self):
        assert abs(mu(50, 2 + 1j, 0.0) - 1.0) < 1e-15

    def test_series_agreement(self):
        # three-term series for the exponent at n = 1e4, lam = i, r = 10
        n, lam, r = 1.0e4, 1j, 10.0
        series = cmath.exp(lam * r ** 2 / (4 * n) + lam ** 2 * r ** 4 / (32 * n ** 3)
                           + lam ** 3 * r ** 6 / (96 * n ** 5))
        leading = cmath.exp(lam * r ** 2 / (4 * n))
        val = mu(n, lam, r)
        assert abs(val - leading) / abs(leading) < 1e-5
        # rounding in the exponent is ~ n * eps after cancellation
        assert abs(val - series) / abs(series) < 2e-11

    def test_domain_error(self):
        with pytest.raises(ValueError):
            mu(10, 2.0, 10.0)  # |lam| r^2 = 200 >= n^2 = 100

    def test_continuity_and_conjugation(self):
        lam = 0.3 - 0.8j
        coarse = np.abs(np.diff(mu(100, lam, np.linspace(0.1, 40.0, 400))))
        fine = np.abs(np.diff(mu(100, lam, np.linspace(0.1, 40.0, 800))))
        # steps shrink linearly under refinement: continuous, no branch jumps
        assert np.max(fine) < 0.6 * np.max(coarse)
        r = np.linspace(0.1, 40.0, 400)
        conj_vals = mu(100, np.conj(lam), r)
        assert np.allclose(conj_vals, np.conj(mu(100, lam, r)), rtol=1e-14)


class TestPhiAb:
    def test_lambda_zero_convention(self):
        assert phi_ab(3.0, 5.0, 0.0, 1.0) == 0.0

    def test_derivative_matches_integrand(self):
        n = 100
        lam = 1j
        r = 1.0
        h = 1e-4
        num = (phi_ab(n, n, lam, r + h) - phi_ab(n, n, lam, r - h)) / (2 * h)
        exact = -lam * r / (2.0 * cmath.sqrt(n * n - lam * r * r) ** 2)
        assert abs(num - exact) / abs(exact) < 1e-6
        d1, _ = phi_ab_derivatives(n, n, lam, r)
        assert abs(d1 - exact) / abs(exact) < 1e-13

    def test_derivative_on_log_grid(self):
        a, b, lam = 120.0, 90.0, 0.7 - 0.4j
        r = np.geomspace(0.5, 40.0, 100)
        h = 1e-5 * r
        num = (phi_ab(a, b, lam, r + h) - phi_ab(a, b, lam, r - h)) / (2 * h)
        d1, _ = phi_ab_derivatives(a, b, lam, r)
        assert np.max(np.abs(num - d1) / np.abs(d1)) < 1e-6

    def test_second_derivative(self):
        a, b, lam = 80.0, 60.0, 1j
        r = np.linspace(1.0, 30.0, 50)
        h = 1e-4
        d1p, _ = phi_ab_derivatives(a, b, lam, r + h)
        d1m, _ = phi_ab_derivatives(a, b, lam, r - h)
        _, d2 = phi_ab_derivatives(a, b, lam, r)
        assert np.max(np.abs((d1p - d1m) / (2 * h) - d2) / np.abs(d2)) < 1e-6

    def test_log_magnitude_scaling(self):
        # |phi| grows like log r along the construction's parameter scaling
        lam = 1j
        ratios = []
        for rho in (1e3, 1e4, 1e5):
            n = int(rho ** 1.5)
            k = int(6 * 1.5 * rho ** 0.75)
            r = np.linspace(rho, rho + 6 * rho ** 0.25, 50)
            vals = phi_ab(n, n - 2 * k, lam, r)
            ratios.append(float(np.max(np.abs(vals))) / math.log(rho))
        assert max(ratios) < 10.0 * min(ratios)
        assert max(ratios) < 5.0


class TestCarlemanWeight:
    def test_zero(self):
        assert carleman_weight(1.0, 0.0) == 0.0

    def test_small_r_slope(self):
        r = 1e-6
        assert abs(carleman_weight(1.0, r) / r - 1.0) < 1e-10

    def test_against_trapezoid_oracle(self):
        # brute-force quadrature oracle with 1e6 panels
        s = np.linspace(0.0, 1.0, 1_000_001)
        oracle = np.trapezoid(np.exp(-s * s), s)
        assert abs(carleman_weight(1.0, 1.0) - oracle) < 1e-8

    def test_monotone_and_comparable(self):
        wf = WeightFunction(nu=1.0)
        r = np.linspace(1e-4, 6.0, 2000)
        w = wf(r)
        # strictly increasing in exact arithmetic: derivative exp(-nu r^2) > 0;
        # the float values saturate near the outer edge, hence non-strict there
        assert np.all(wf.derivative(r) > 0)
        assert np.all(np.diff(w) >= 0)
        inner = r < 4.0
        assert np.all(np.diff(w[inner]) > 0)
        c1 = wf.c1
        assert np.all(w / r <= c1 + 1e-12)
        assert np.all(w / r >= 1.0 / c1 - 1e-12)
        assert c1 < 10.0

    def test_nu_configurable(self):
        w2 = carleman_weight(4.0, 2.0)
        assert abs(w2 - math.sqrt(math.pi / 16.0) * math.erf(4.0)) < 1e-14
