"""Boundary layer operator: decay rates, profiles, resonant parts, traces."""

import math
import warnings

import numpy as np
import pytest

from rotstrip.params import Params
from rotstrip import layers as L
from rotstrip.layers import (
    BoundaryTrace,
    a_lambda_matrix,
    build_B,
    decay_rates,
    empty_trace,
    filter_resonant,
    kernel_vector,
    profile_W,
    resonant_profile,
    trace_residuals,
    transition_coeffs,
    transition_matrix,
)


def loglog_slope(x, y):
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return np.polyfit(x, y, 1)[0]


class TestALambdaMatrix:
    def test_kh_zero_form(self):
        p = Params(1e-3, 1e-3)
        A = a_lambda_matrix(0.5 + 0.5j, 0.7, (0, 0), p)
        lam2 = (0.5 + 0.5j) ** 2
        expect = np.array([[1j * 0.7 - lam2, -1.0], [1.0, 1j * 0.7 - lam2]])
        assert np.allclose(A, expect, atol=1e-15)

    def test_singular_at_classical_root(self):
        # mu = 0, lambda^2 = i: det = (-i)^2 + 1 = 0 exactly at k_h = 0
        p = Params(1e-3, 1e-3)
        lam = np.sqrt(1j)
        A = a_lambda_matrix(lam, 0.0, (0, 0), p)
        assert abs(np.linalg.det(A)) < 1e-14

    def test_finite_away_from_variety(self):
        p = Params(1e-3, 1e-3)
        A = a_lambda_matrix(1.0, 1.0, (1, 0), p)
        assert np.all(np.isfinite(A))
        assert abs(np.linalg.det(A)) > 1e-3

    def test_pole_rejected(self):
        p = Params(1e-2, 1e-2)
        lam_pole = math.sqrt(p.eps_nu)  # lambda^2 = eps nu |k_h|^2 with |k_h| = 1
        with pytest.raises(ZeroDivisionError):
            a_lambda_matrix(lam_pole, 0.0, (1, 0), p)


class TestDecayRates:
    def test_classical_ekman_exponents(self):
        p = Params(1e-6, 1e-6)
        r = decay_rates(0.0, (1, 0), p)
        assert abs(r.lambda_minus - np.exp(1j * math.pi / 4)) < 1e-2
        assert abs(r.lambda_plus - np.exp(-1j * math.pi / 4)) < 1e-2
        assert r.det_residual(p) < 1e-10

    def test_resonant_column_has_zero_rate(self):
        for mu in (1.0, -1.0):
            r = decay_rates(mu, (0, 0), Params(1e-4, 1e-4))
            assert r.degenerate_zero
            rates = sorted([abs(r.lambda_minus), abs(r.lambda_plus)])
            assert rates[0] == 0.0
            assert rates[1] == pytest.approx(math.sqrt(2.0), abs=1e-14)
            # nonzero rate squared is 2 mu i
            s_big = r.s_minus if abs(r.s_minus) > 0.5 else r.s_plus
            assert s_big == pytest.approx(2j * mu, abs=1e-14)

    def test_nonnegative_real_parts(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            eps = 10.0 ** rng.uniform(-7, -1)
            nu = 10.0 ** rng.uniform(-7, -1)
            mu = rng.choice([0.0, 0.5, 1.0, -1.0, 2.0, float(rng.uniform(-2, 2))])
            k_h = (int(rng.integers(-3, 4)), int(rng.integers(-3, 4)))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                r = decay_rates(mu, k_h, Params(eps, nu))
            assert r.lambda_minus.real >= -1e-14
            assert r.lambda_plus.real >= -1e-14
            assert r.det_residual(Params(eps, nu)) < 1e-10

    def test_quasi_resonant_rate_window(self):
        # |lambda+(1, k_h)| stays within a fixed window of (eps + sqrt(eps nu))^(1/2)
        ratios = []
        prev = None
        for eps in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]:
            p = Params(eps, eps)
            r = decay_rates(1.0, (1, 0), p, prev=prev)
            ratios.append(abs(r.lambda_plus) / (eps + math.sqrt(eps * eps)) ** 0.5)
            prev = r
        assert max(ratios) / min(ratios) < 10.0
        assert 0.05 < min(ratios) and max(ratios) < 20.0

    def test_quasi_resonant_scaling_slope(self):
        xs, ys = [], []
        prev = None
        for eps in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7]:
            p = Params(eps, eps)
            r = decay_rates(1.0, (1, 0), p, prev=prev)
            xs.append(eps + math.sqrt(eps * eps))
            ys.append(abs(r.lambda_plus))
            prev = r
        assert loglog_slope(xs, ys) == pytest.approx(0.5, abs=0.05)

    def test_ambiguity_reported_with_candidates(self):
        # nu >> eps puts the two slow roots at comparable distance to the pole
        r = decay_rates(1.0, (1, 0), Params(1e-6, 1e-2))
        assert r.ambiguous
        assert len(r.plus_candidates) == 2
        assert r.plus_candidates[0] == r.s_plus

    def test_continuity_tracking_overrides(self):
        p1 = Params(1e-4, 1e-4)
        r1 = decay_rates(1.0, (1, 0), p1)
        p2 = Params(8e-5, 8e-5)
        r2 = decay_rates(1.0, (1, 0), p2, prev=r1)
        assert abs(r2.s_plus - r1.s_plus) < 0.5 * abs(r1.s_plus)

    def test_third_root_exposed_but_distinct(self):
        p = Params(1e-3, 1e-3)
        r = decay_rates(0.5, (1, 0), p)
        assert r.third_root_s not in (r.s_minus, r.s_plus)
        # it is also a genuine root of the cleared cubic
        c = L.decay_cubic_coefficients(0.5, (1, 0), p)
        assert abs(np.polyval(c, r.third_root_s)) < 1e-10


class TestKernelVectors:
    def test_classical_polarisations(self):
        p = Params(1e-8, 1e-8)
        r = decay_rates(0.0, (1, 0), p)
        wm = kernel_vector(r.lambda_minus, 0.0, (1, 0), p)
        wp = kernel_vector(r.lambda_plus, 0.0, (1, 0), p)
        assert np.allclose(wm.w, [1.0, -1j], atol=1e-3)
        assert np.allclose(wp.w, [1.0, 1j], atol=1e-3)
        assert wm.normalization == "first"

    def test_resonant_column_exact(self):
        p = Params(1e-3, 1e-3)
        r = decay_rates(1.0, (0, 0), p)
        lam = r.lambda_minus if abs(r.lambda_minus) > 0 else r.lambda_plus
        w = kernel_vector(lam, 1.0, (0, 0), p)
        assert np.allclose(w.w, [1.0, -1j], atol=1e-14)

    def test_defining_property(self):
        p = Params(1e-4, 1e-5)
        r = decay_rates(0.3, (2, -1), p)
        for lam in (r.lambda_minus, r.lambda_plus):
            w = kernel_vector(lam, 0.3, (2, -1), p).w
            A = a_lambda_matrix(lam, 0.3, (2, -1), p)
            assert np.linalg.norm(A @ w) < 1e-10 * max(1.0, np.linalg.norm(A))

    def test_rejects_off_variety(self):
        p = Params(1e-3, 1e-3)
        with pytest.raises(ValueError, match="variety"):
            kernel_vector(1.0 + 0j, 0.0, (1, 0), p)


class TestTransitionCoeffs:
    def test_basis_decomposition(self):
        p = Params(1e-4, 1e-4)
        r = decay_rates(0.0, (1, 0), p)
        _, wm, wp = transition_matrix(r, p)
        am, ap = transition_coeffs(wm, 0.0, (1, 0), p, rates=r)
        assert abs(am - 1.0) < 1e-12 and abs(ap) < 1e-12

    def test_circular_trace_limits(self):
        am, ap = transition_coeffs(np.array([1.0, 1j]), 0.0, (1, 0), Params(1e-8, 1e-8))
        assert abs(am) < 1e-3
        assert abs(ap - 1.0) < 1e-3

    def test_det_P_near_2i(self):
        devs, scales = [], []
        for eps in [1e-2, 1e-3, 1e-4, 1e-5]:
            p = Params(eps, eps)
            r = decay_rates(0.0, (1, 0), p)
            P, _, _ = transition_matrix(r, p)
            det = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
            devs.append(abs(det - 2j))
            scales.append(eps + math.sqrt(eps * eps))
        ratios = np.array(devs) / np.array(scales)
        assert ratios.max() < 100.0  # |det P - 2i| = O(eps + sqrt(eps nu))
        assert devs[-1] < devs[0]


def single_mode_solution(side, mu, k_h, delta_hat, params):
    table = {(mu, k_h): delta_hat}
    if side == 0:
        return build_B(BoundaryTrace(0, table), empty_trace(1), params)
    return build_B(empty_trace(0), BoundaryTrace(1, table), params)


def equation_residual(group, z, t=0.123):
    """Independent oracle: substitute the profile (with its companion
    pressure from the vertical momentum balance) into the evolution operator
    and return the relative residual of the horizontal momentum rows."""
    p = group.params
    eps, nu = p.epsilon, p.nu
    k1, k2 = group.k_h
    kh2 = k1 * k1 + k2 * k2
    mu = group.mu
    scale = math.sqrt(eps * nu)
    worst = 0.0
    for comp in group.components:
        lam = comp.lam
        # amplitude of this component alone
        if group.side == 0:
            vh = comp.alpha * comp.w
            v3 = comp.alpha * (scale / lam) * 1j * (k1 * comp.w[0] + k2 * comp.w[1])
            dz_sign = -lam / scale
        else:
            vh = comp.alpha * (scale / lam) * comp.w
            v3 = -comp.alpha * (scale ** 2 / lam ** 2) * 1j * (k1 * comp.w[0] + k2 * comp.w[1])
            dz_sign = lam / scale
        coef = (1j * mu / eps) + kh2 - nu * dz_sign ** 2
        # vertical momentum fixes the pressure amplitude: coef*v3 + dz_sign*p = 0
        phat = -coef * v3 / dz_sign
        r1 = coef * vh[0] - vh[1] / eps + 1j * k1 * phat
        r2 = coef * vh[1] + vh[0] / eps + 1j * k2 * phat
        mag = max(abs(coef * vh[0]), abs(vh[1] / eps), abs(vh[0] / eps), 1e-300)
        worst = max(worst, abs(r1) / mag, abs(r2) / mag)
    return worst


class TestProfiles:
    def test_bottom_trace_exact(self):
        p = Params(1e-3, 2e-3)
        delta = np.array([0.3 - 0.2j, 1.1j])
        sol = single_mode_solution(0, 0.5, (1, -2), delta, p)
        (g,) = sol.classical
        assert np.allclose(g.horizontal_trace(0), delta, atol=1e-12)

    def test_top_stress_trace_exact(self):
        p = Params(1e-3, 2e-3)
        delta = np.array([1.0, 0.5 + 0.5j])
        sol = single_mode_solution(1, 2.0, (2, 1), delta, p)
        (g,) = sol.classical
        assert np.allclose(g.dz_horizontal_trace(1), delta, atol=1e-12)

    def test_exact_solution_residual(self):
        p = Params(1e-3, 1e-3)
        for side, mu, k_h in [(0, 0.0, (1, 0)), (1, 0.5, (2, -1)), (0, 2.0, (0, 0)),
                              (1, 1.0, (1, 1))]:
            sol = single_mode_solution(side, mu, k_h, np.array([1.0, 0.3j]), p)
            for g in sol.groups():
                assert equation_residual(g, None) < 1e-8

    def test_divergence_free_on_grid(self):
        p = Params(1e-2, 1e-2)
        sol = single_mode_solution(0, 0.5, (2, 1), np.array([1.0, -1j]), p)
        (g,) = sol.classical
        z = np.linspace(0.05, 0.95, 7)
        h = 1e-4
        for zz in z:
            prof_p = g.hat_profile(np.array([zz + h]))[:, 0]
            prof_m = g.hat_profile(np.array([zz - h]))[:, 0]
            prof_pp = g.hat_profile(np.array([zz + 2 * h]))[:, 0]
            prof_mm = g.hat_profile(np.array([zz - 2 * h]))[:, 0]
            prof = g.hat_profile(np.array([zz]))[:, 0]
            dz3 = (-prof_pp[2] + 8 * prof_p[2] - 8 * prof_m[2] + prof_mm[2]) / (12 * h)
            div = 1j * 2 * prof[0] + 1j * 1 * prof[1] + dz3
            assert abs(div) < 1e-9 * max(1.0, np.abs(prof).max())

    def test_l2_scaling_of_wall_profiles(self):
        # || W^j ||_L2 ~ (eps nu / lambda^2)^{(1+2j)/4}
        for side in (0, 1):
            norms, scales = [], []
            for eps in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]:
                p = Params(eps, eps)
                sol = single_mode_solution(side, 0.0, (1, 0), np.array([1.0, 0.0]), p)
                (g,) = sol.classical
                norms.append(g.l2_norm_h())
                scales.append(p.eps_nu)
            slope = loglog_slope(scales, norms)
            assert slope == pytest.approx((1 + 2 * side) / 4.0, abs=0.03)

    def test_vertical_component_smaller_by_sqrt_eps_nu(self):
        for eps in [1e-3, 1e-5]:
            p = Params(eps, eps)
            sol = single_mode_solution(0, 0.0, (1, 0), np.array([1.0, 0.0]), p)
            (g,) = sol.classical
            ratio = g.l2_norm_3() / g.l2_norm_h()
            assert ratio < 10.0 * math.sqrt(p.eps_nu)


class TestProfileW:
    def test_bottom_trace_and_vlambda_prefactors(self):
        p = Params(1e-3, 2e-3)
        r = decay_rates(0.5, (2, 1), p)
        w = kernel_vector(r.lambda_minus, 0.5, (2, 1), p).w
        W0 = profile_W(0, r.lambda_minus, w, 0.5, (2, 1), p)
        assert np.allclose(W0.horizontal_trace(0), w, atol=1e-14)
        z = np.array([0.0])
        prof = W0.hat_profile(z)[:, 0]
        scale = p.layer_scale
        expect_v3 = (scale / r.lambda_minus) * 1j * (2 * w[0] + 1 * w[1])
        assert prof[2] == pytest.approx(expect_v3, abs=1e-15)

    def test_top_stress_trace(self):
        p = Params(1e-3, 1e-3)
        r = decay_rates(0.0, (1, 0), p)
        w = kernel_vector(r.lambda_plus, 0.0, (1, 0), p).w
        W1 = profile_W(1, r.lambda_plus, w, 0.0, (1, 0), p, alpha=2.0 - 1j)
        assert np.allclose(W1.dz_horizontal_trace(1), (2.0 - 1j) * w, atol=1e-13)

    def test_rejects_nondecaying_rate(self):
        p = Params(1e-3, 1e-3)
        with pytest.raises(ValueError, match="Re"):
            profile_W(0, 1j, np.array([1.0, 1j]), 1.0, (0, 0), p)


class TestResonantProfile:
    def test_wall_value_is_trace(self):
        for t in (1e-4, 0.1, 3.0):
            v = resonant_profile(0, 2.0 - 1j, 0.01, t, np.array([0.0]))
            assert v[0] == pytest.approx(2.0 - 1j, abs=1e-12)

    def test_top_stress_value(self):
        nu, t = 0.01, 0.5
        h = 1e-6
        delta = 1.5 + 0.2j
        vp = resonant_profile(1, delta, nu, t, np.array([1.0]))[0]
        vm = resonant_profile(1, delta, nu, t, np.array([1.0 - h]))[0]
        assert (vp - vm) / h == pytest.approx(delta, rel=1e-4)

    def test_interior_tail_asymptotics(self):
        nu, t = 1e-3, 1.0
        z = 0.35
        X = z / math.sqrt(nu * t)
        exact = resonant_profile(0, 1.0, nu, t, np.array([z]))[0]
        tail = (2.0 / math.sqrt(math.pi)) / X * math.exp(-X * X / 4.0)
        assert exact.real == pytest.approx(tail, rel=0.05)

    def test_sharp_interface_at_time_zero(self):
        v = resonant_profile(0, 1.0, 0.01, 0.0, np.array([0.0, 0.2, 0.9]))
        assert np.allclose(v, [1.0, 0.0, 0.0], atol=1e-15)

    def test_heat_equation_residual(self):
        nu = 0.02
        dz, dt = 1e-4, 1e-6
        for (t0, z0) in [(0.5, 0.1), (1.0, 0.3), (0.25, 0.05)]:
            f = lambda t, z: resonant_profile(0, 1.0, nu, t, np.array([z]))[0].real
            ut = (f(t0 + dt, z0) - f(t0 - dt, z0)) / (2 * dt)
            uzz = (f(t0, z0 + dz) - 2 * f(t0, z0) + f(t0, z0 - dz)) / dz ** 2
            assert ut - nu * uzz == pytest.approx(0.0, abs=1e-5)


class TestBuildB:
    def test_zero_traces_give_zero(self):
        p = Params(1e-3, 1e-3)
        sol = build_B(empty_trace(0), empty_trace(1), p)
        assert not sol.groups() and not sol.resonant
        x = (np.array(0.1), np.array(0.2), np.array(0.5))
        assert np.allclose(sol.evaluate(0.0, x), 0.0)

    def test_top_only_trace_leaves_bottom_empty(self):
        p = Params(1e-3, 1e-3)
        sol = single_mode_solution(1, 0.0, (1, 0), np.array([1.0, 0.0]), p)
        assert all(g.side == 1 for g in sol.groups())
        assert sol.part_norm_h("quasi_resonant") == 0.0

    def test_top_nonresonant_norm_scaling(self):
        norms, ens = [], []
        for eps in [1e-2, 1e-3, 1e-4, 1e-5]:
            p = Params(eps, eps)
            sol = single_mode_solution(1, 0.0, (1, 0), np.array([1.0, 0.0]), p)
            norms.append(sol.part_norm_h("classical"))
            ens.append(p.eps_nu)
        assert loglog_slope(ens, norms) == pytest.approx(0.75, abs=0.03)

    def test_resonant_projection_keeps_aligned_part(self):
        p = Params(1e-3, 1e-3)
        sol = single_mode_solution(0, 1.0, (0, 0), np.array([1.0, 1j]), p)
        assert len(sol.resonant) == 1
        (entry,) = sol.resonant[0].entries
        assert entry.amplitude == pytest.approx(1.0, abs=1e-14)
        assert not sol.classical  # orthogonal remainder vanishes

    def test_resonant_projection_kills_orthogonal_part(self):
        p = Params(1e-3, 1e-3)
        sol = single_mode_solution(0, 1.0, (0, 0), np.array([1.0, -1j]), p)
        assert not sol.resonant
        # remainder excites only the O(1)-rate profile
        (g,) = sol.classical
        assert len(g.components) == 1
        assert abs(g.components[0].lam) == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_linearity_coefficientwise(self):
        p = Params(1e-3, 2e-3)
        d1 = np.array([1.0, 0.5j])
        d2 = np.array([-0.3, 1.0 + 1j])
        a, b = 2.0 - 1j, 0.7j
        sol1 = single_mode_solution(0, 0.5, (1, 0), d1, p)
        sol2 = single_mode_solution(0, 0.5, (1, 0), d2, p)
        sol = single_mode_solution(0, 0.5, (1, 0), a * d1 + b * d2, p)
        z = np.linspace(0, 1, 11)
        combo = a * sol1.hat_profile((1, 0), 0.3, z) + b * sol2.hat_profile((1, 0), 0.3, z)
        assert np.allclose(sol.hat_profile((1, 0), 0.3, z), combo, atol=1e-12)

    def test_resonant_norm_growth_slope(self):
        p = Params(1e-3, 1e-3)
        sol = single_mode_solution(0, 1.0, (0, 0), np.array([1.0, 1j]), p)
        (layer,) = sol.resonant
        ts = np.array([1e-4, 1e-3, 1e-2, 1e-1]) / p.nu
        norms = [layer.l2_norm_h(t) for t in ts]
        assert loglog_slope(p.nu * ts, norms) == pytest.approx(0.25, abs=0.05)


class TestTraceResiduals:
    def test_exponentially_small_opposite_traces(self):
        p = Params(1e-2, 1e-2)
        sol = single_mode_solution(0, 0.0, (1, 0), np.array([1.0, 0.0]), p)
        res = trace_residuals(sol, p, t=0.1)
        mag = res.max_magnitude("classical_bottom_at_top")
        assert 0.0 < mag < math.exp(-0.5 / math.sqrt(p.eps_nu))
        # at sharper parameters the trace underflows outright
        p2 = Params(1e-4, 1e-4)
        sol2 = single_mode_solution(0, 0.0, (1, 0), np.array([1.0, 0.0]), p2)
        assert trace_residuals(sol2, p2, t=0.1).max_magnitude("classical_bottom_at_top") == 0.0

    def test_resonant_trace_magnitude(self):
        p = Params(1e-3, 1e-3)
        sol = single_mode_solution(0, 1.0, (0, 0), np.array([1.0, 1j]), p)
        for nut in (1e-3, 1e-2):
            res = trace_residuals(sol, p, t=nut / p.nu)
            bound = 4.0 * math.sqrt(nut) * math.exp(-1.0 / (4.0 * nut))
            assert res.max_magnitude("resonant_traces") <= bound

    def test_residuals_vanish_along_sweep(self):
        mags = []
        for eps in [1e-2, 1e-3, 1e-4]:
            p = Params(eps, eps)
            sol = single_mode_solution(0, 0.5, (1, 0), np.array([1.0, 1.0]), p)
            res = trace_residuals(sol, p, t=0.1)
            mags.append(res.max_magnitude("classical_bottom_at_top"))
        assert mags[2] <= mags[1] <= mags[0]


class TestBoundaryTraceNorm:
    def test_square_rooted_sum(self):
        tr = BoundaryTrace(0, {(0.0, (1, 0)): np.array([3.0, 4.0]),
                               (1.0, (0, 0)): np.array([0.0, 12.0])})
        assert tr.norm() == pytest.approx(13.0, abs=1e-14)

    def test_scaling(self):
        tr = BoundaryTrace(1, {(0.5, (2, 1)): np.array([1.0, 1j])})
        assert tr.scaled(2.0).norm() == pytest.approx(2.0 * tr.norm(), rel=1e-14)


class TestFilterResonant:
    def test_co_rotating_wave_becomes_steady(self):
        eps = 1e-2
        z = np.linspace(0, 1, 5)
        for t in (0.0, 0.013, 1.7):
            u = np.multiply.outer(np.array([1.0, 1j, 0.0]), np.ones_like(z)) * np.exp(1j * t / eps)
            v = filter_resonant(u, eps, t)
            expect = np.multiply.outer(np.array([1.0, 1j, 0.0]), np.ones_like(z))
            assert np.allclose(v, expect, atol=1e-12)

    def test_steady_input_oscillates(self):
        eps = 1e-2
        z = np.linspace(0, 1, 3)
        u = np.multiply.outer(np.array([1.0, -1j, 0.0]), np.ones_like(z))
        t = 0.4
        v = filter_resonant(u, eps, t)
        expect = u * np.exp(1j * t / eps)
        assert np.allclose(v, expect, atol=1e-12)
