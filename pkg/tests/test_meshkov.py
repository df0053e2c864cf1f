import math

import numpy as np
import pytest

from uclab.meshkov import (SIN_PI_7, AnnulusSpec, Annulus, ConstructionError,
                           build_annulus, build_phase, build_solution,
                           choose_nk, im_part_check)
from uclab.scalar import mu_log


@pytest.fixture(scope="module")
def sol_w_i():
    return build_solution("W", 1j, 1.5, 100.0, n_annuli=3)


@pytest.fixture(scope="module")
def sol_v_0():
    return build_solution("V", 0j, 7.0 / 6.0, 100.0, n_annuli=3)


class TestChooseNK:
    def test_gradient_case_window(self):
        n, k = choose_nk(1.0e4, 1.5, "W")
        assert abs(n - 1.0e4 ** 1.5) <= 1.0
        assert abs(k - 6.0 * 1.5 * 1.0e4 ** 0.75) <= 40.0

    def test_scalar_case_gap_vanishes_relatively(self):
        # k = O(sqrt(n)): the gap fraction k/n decays with the radius
        fracs = []
        for rho in (1e3, 1e5, 1e7):
            n, k = choose_nk(rho, 4.0 / 3.0, "V")
            fracs.append(k / n)
        assert fracs[2] < fracs[1] < fracs[0]
        assert fracs[2] < 0.02

    def test_consecutive_indices_chain(self):
        rho, beta0 = 100.0, 1.5
        n1, k1 = choose_nk(rho, beta0, "W")
        rho2 = rho + 6.0 * rho ** (1.0 - beta0 / 2.0)
        n2, _ = choose_nk(rho2, beta0, "W")
        assert n2 == n1 + k1

    def test_small_radius_rejected(self):
        # the gap window is generous; the rejection comes from the broken
        # mode ladder (n - 2k <= 0) when the radius is far too small
        with pytest.raises(ConstructionError):
            n, k = choose_nk(5.0, 1.5, "W")
            Annulus(AnnulusSpec(5.0, 0.25, n, k, 0j, "W"))


class TestBuildPhase:
    def test_mean_zero_exact(self):
        phase = build_phase(1000, 297)
        t = phase.T
        assert abs(phase.Phi(np.asarray(t))) < 1e-12 * 297 * t
        # quadrature cross-check of the mean
        grid = np.linspace(0.0, t, 20001)
        f, _ = phase.f(grid)
        assert abs(np.trapezoid(f, grid)) < 1e-6 * 297 * t

    def test_antiderivative_vanishes_at_period_multiples(self):
        phase = build_phase(1000, 297)
        for m in range(6):
            assert abs(phase.Phi(np.asarray(m * phase.T))) < 1e-10

    def test_profile_bounds(self):
        phase = build_phase(1000, 297)
        grid = np.linspace(0.0, phase.T, 4096)
        f, fp = phase.f(grid)
        assert np.all(f >= -4 * 297 - 1e-9)
        assert np.all(f <= 5 * 297 + 1e-9)
        # ramp slope: 9k * max s' / (ramp width * T) = 142.4 k / T
        assert np.max(np.abs(fp)) <= 143.0 * 297 / phase.T
        phi = phase.Phi(grid)
        assert np.max(np.abs(phi)) <= 5 * 297 * phase.T

    def test_sector_bounds(self):
        phase = build_phase(1000, 297)
        t = phase.T
        for m in range(3):
            mids = np.linspace((m + 0.2) * t, (m + 0.8) * t, 200)
            s = phase.S(mids)
            assert np.all(s >= 2 * math.pi * m + math.pi / 7 - 1e-12)
            assert np.all(s <= 2 * math.pi * (m + 1) - math.pi / 7 + 1e-12)

    def test_phase_speed_above_base_mode(self):
        phase = build_phase(1000, 297)
        grid = np.linspace(0.0, phase.T, 1024)
        f, _ = phase.f(grid)
        assert np.min(2 * 1000 + 2 * 297 + f) > 1000

    def test_rejects_narrow_mode_gap(self):
        with pytest.raises(ConstructionError):
            build_phase(100, 90)


class TestBuildAnnulus:
    def test_guards_and_swap_factor(self, sol_w_i):
        g = sol_w_i.guards[0]
        assert g["step1_ratio_log_low"] > 0
        assert g["step1_ratio_log_high"] > 0
        assert g["swap_factor_log_min"] < 0  # |g| <= 1 throughout
        assert g["im_ratio_sup"] <= 0.5 * SIN_PI_7

    def test_amplitude_matching_at_transition_radius(self, sol_w_i):
        ann = sol_w_i.annuli[0]
        x1 = ann.x(1.0)
        lam = ann.lam
        lhs = -ann.n * math.log(x1) + complex(mu_log(ann.n, lam, x1)).real
        rhs = (ann.log_b.real - (ann.n - 2 * ann.k) * math.log(x1)
               + complex(mu_log(ann.n - 2 * ann.k, lam, x1)).real)
        assert abs(lhs - rhs) < 1e-10

    def test_lambda_zero_simplification(self, sol_v_0):
        # no amplitude factor, no transition corrector: constants are real
        ann = sol_v_0.annuli[0]
        assert abs(ann.log_b.imag) < 1e-14
        rep = sol_v_0.residual_report(n_points=1500, seed=0)
        assert rep.passed

    def test_too_small_radius_fails(self):
        with pytest.raises(ConstructionError):
            build_solution("V", 0j, 7.0 / 6.0, 5.0, n_annuli=1)

    def test_large_eigenvalue_rejected_at_small_radius(self):
        with pytest.raises(ConstructionError):
            build_solution("V", 1j, 7.0 / 6.0, 100.0, n_annuli=1)

    @pytest.mark.parametrize("lam", [1.0 + 0j, -1 + 1j])
    def test_eigenvalue_matrix_builds(self, lam):
        # remaining default-matrix eigenvalues: guards validate and a quick
        # residual panel passes
        sol = build_solution("W", lam, 1.5, 100.0, n_annuli=1)
        rng = np.random.default_rng(0)
        ann = sol.annuli[0]
        r = ann.r_lo * 1.001 + (ann.r_hi * 0.999 - ann.r_lo * 1.001) \
            * rng.random(200)
        phi = 2 * math.pi * rng.random(200)
        assert np.max(sol.residual(r, phi)) < 1e-4


class TestEval:
    def test_pure_mode_formula(self, sol_w_i):
        ann = sol_w_i.annuli[0]
        r = np.full(8, ann.x(0.05))
        phi = np.linspace(0, 2 * math.pi, 8, endpoint=False)
        u, off = sol_w_i.eval_u(r, phi)
        expected = np.exp(-ann.n * np.log(r) + complex(mu_log(ann.n, ann.lam, r[0]))
                          - 1j * ann.n * phi - off)
        assert np.max(np.abs(u - expected)) < 1e-12

    def test_angular_periodicity(self, sol_w_i):
        rng = np.random.default_rng(1)
        r = 101.0 + 30.0 * rng.random(64)
        phi = 2 * math.pi * rng.random(64)
        offset = sol_w_i.log_magnitude(r)
        a = sol_w_i.fields(r, phi, offset=offset).u
        b = sol_w_i.fields(r, phi + 2 * math.pi, offset=offset).u
        # the shifted angle loses ~eps(2 pi) which the mode index amplifies
        n_max = max(ann.n + 2 * ann.k for ann in sol_w_i.annuli)
        tol = max(1e-12, 8 * n_max * np.finfo(float).eps)
        assert np.max(np.abs(a - b)) < tol * np.max(np.abs(a))

    def test_gradient_vs_central_difference(self, sol_w_i):
        rng = np.random.default_rng(2)
        r = 100.5 + 35.0 * rng.random(1200)
        # keep clear of the swap-cutoff edge, where the fifth derivative is
        # exponentially large and the difference quotient itself degrades
        for ann in sol_w_i.annuli:
            r = r[np.abs(r - ann.x(11.0 / 3.0)) > 0.05]
        r = r[:1000]
        phi = 2 * math.pi * rng.random(r.size)
        offset = sol_w_i.log_magnitude(r)
        u_r, u_t, _ = sol_w_i.eval_grad_u(r, phi, offset=offset)
        h = r * 1e-6
        up = sol_w_i.fields(r + h, phi, offset=offset).u
        um = sol_w_i.fields(r - h, phi, offset=offset).u
        fd_r = (up - um) / (2 * h)
        hp = 1e-8  # angular frequencies reach the ramp-slope scale k/T
        vp = sol_w_i.fields(r, phi + hp, offset=offset).u
        vm = sol_w_i.fields(r, phi - hp, offset=offset).u
        fd_t = (vp - vm) / (2 * hp) / r
        scale = np.abs(u_r) + np.abs(u_t)
        assert np.max(np.abs(fd_r - u_r) / scale) < 1e-5
        assert np.max(np.abs(fd_t - u_t) / scale) < 1e-5

    def test_out_of_range(self, sol_w_i):
        with pytest.raises(ValueError):
            sol_w_i.eval_u(np.array([1e6]), np.array([0.0]))


class TestPotential:
    def test_scalar_potential_decay(self, sol_v_0):
        b0 = sol_v_0.beta0
        rate = 2.0 - 1.5 * b0
        rng = np.random.default_rng(3)
        for ann in sol_v_0.annuli:
            r = ann.r_lo + (ann.r_hi - ann.r_lo) * rng.random(400)
            phi = 2 * math.pi * rng.random(400)
            vals = np.abs(sol_v_0.eval_potential(r, phi)) * r ** rate
            assert np.max(vals) < 100.0

    def test_gradient_potential_decay(self, sol_w_i):
        b0 = sol_w_i.beta0
        rate = 1.0 - 0.5 * b0
        rng = np.random.default_rng(4)
        for ann in sol_w_i.annuli:
            r = ann.r_lo + (ann.r_hi - ann.r_lo) * rng.random(400)
            phi = 2 * math.pi * rng.random(400)
            vals = sol_w_i.potential_magnitude(r, phi) * r ** rate
            assert np.max(vals) < 2000.0

    def test_midband_sector_floor(self, sol_w_i):
        rep = sol_w_i.sector_bound_report()
        assert rep.passed, [e.check_id for e in rep.failures]


class TestResidual:
    def test_pure_and_transition(self, sol_w_i):
        rep = sol_w_i.residual_report(n_points=4000, seed=11)
        by_id = {e.check_id: e for e in rep.entries}
        assert by_id["fd-residual-pure"].measured < 1e-6
        assert by_id["fd-residual-transition"].measured < 1e-4

    def test_harmonic_mode_plain_laplacian(self, sol_v_0):
        # at lambda = 0 the starting mode is harmonic: residual at rounding
        ann = sol_v_0.annuli[0]
        rng = np.random.default_rng(5)
        r = ann.x(0.0) + (ann.x(0.09) - ann.x(0.0)) * rng.random(100)
        phi = 2 * math.pi * rng.random(100)
        res = sol_v_0.residual(r, phi)
        assert np.max(res) < 1e-7


class TestDecayAndContinuity:
    def test_continuity(self, sol_w_i, sol_v_0):
        for sol in (sol_w_i, sol_v_0):
            rep = sol.continuity_report()
            assert rep.passed
            assert rep.entries[0].measured < 1e-8

    def test_decay_report(self, sol_w_i, sol_v_0):
        for sol, b0 in ((sol_w_i, 1.5), (sol_v_0, 7.0 / 6.0)):
            rep = sol.verify_decay()
            assert rep.passed, [(e.check_id, e.measured) for e in rep.failures]
            assert abs(rep.metadata["fitted_beta"] - b0) < 0.15

    def test_junction_modulus_match(self, sol_w_i):
        rep = sol_w_i.verify_decay()
        by_id = {e.check_id: e for e in rep.entries}
        assert by_id["junction-modulus"].measured < 1e-6

    def test_potential_stability_across_annuli(self, sol_w_i, sol_v_0):
        for sol in (sol_w_i, sol_v_0):
            rep = sol.potential_decay_report()
            assert rep.passed
            assert rep.entries[0].measured < 2.0


class TestImPart:
    def test_real_nonneg_eigenvalue_is_real(self):
        out = im_part_check([1000, 10000], 0.09)
        # all factors real: imaginary part at rounding level
        assert max(out["sup_im"]) < 1e-12

    def test_sweep_slope(self):
        out = im_part_check([1000, 10000, 100000], 1j)
        assert abs(out["slope"] + 1.0) < 0.2
        products = out["sup_im_times_n"]
        assert max(products) < 2.0 * min(products)

    def test_margin_at_default_floor(self, sol_w_i):
        for g in sol_w_i.guards:
            assert g["im_ratio_sup"] <= 0.5 * SIN_PI_7


class TestMixedFrameClosedForms:
    def test_term_ratios_match_closed_forms(self, sol_w_i):
        # in the middle transition band the two terms are bare modes, and the
        # frame-solve coefficients reduce to explicit ratios
        ann = sol_w_i.annuli[0]
        n, k, lam = ann.n, ann.k, ann.lam
        r = np.full(5, ann.x(1.0))
        phi = np.linspace(0.01, 0.02, 5)
        fl = ann.fields(r, phi)
        ta, tb = fl.terms
        a_n = np.sqrt(n * n - lam * r ** 2 + 0j)
        a_m = np.sqrt((n - 2 * k) ** 2 - lam * r ** 2 + 0j)
        f_val, _ = ann.phase.f(phi)
        assert np.allclose(ta.t_r / ta.t, -a_n / r, rtol=1e-10)
        assert np.allclose(-1j * ta.t_p / (r * ta.t), -n / r, rtol=1e-10)
        assert np.allclose(tb.t_r / tb.t, -a_m / r, rtol=1e-10)
        assert np.allclose(-1j * tb.t_p / (r * tb.t),
                           (n + 2 * k + f_val) / r, rtol=1e-10)
        # pure-mode Helmholtz ratio of term A
        ja = (ta.t_rr + ta.t_r / r + ta.t_pp / r ** 2) / ta.t + lam
        assert np.allclose(ja, lam / a_n, rtol=1e-8)


class TestSpecValidation:
    def test_window_invariants(self):
        with pytest.raises(ConstructionError):
            AnnulusSpec(100.0, 0.25, 900, 297, 0j, "W").validate_window()
        with pytest.raises(ConstructionError):
            AnnulusSpec(100.0, 0.25, 1000, 400, 0j, "W").validate_window()

    def test_mode_ladder_guard(self):
        spec = AnnulusSpec(100.0, 0.25, 1000, 297, 0j, "W")
        ann = Annulus(spec)
        assert ann.n - 2 * ann.k > 0
