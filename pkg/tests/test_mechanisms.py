import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr, ndtri

import oracles
from smoothcert.core import (ExpectationMode, NoiseConfig, ValidationError,
                             make_bounds)
from smoothcert.mechanisms import (DEFAULT_OPTIMIZER, MechanismId,
                                   OptimizerSettings, certify, certify_cohen,
                                   certify_improved_dp, certify_lecuyer,
                                   certify_li, dp_delta_budget,
                                   dp_delta_required, std_normal_cdf,
                                   std_normal_quantile)

MULT = ExpectationMode.MULTINOMIAL
SOFT = ExpectationMode.SOFTMAX
NOISE = NoiseConfig(sigma=1.0)


def mbounds(e0, e1, mode=MULT):
    return make_bounds(e0, e1, mode)


class TestNormalCdf:
    def test_center(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_table_value(self):
        assert std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)

    @given(st.floats(-10.0, 10.0))
    def test_symmetry(self, x):
        assert std_normal_cdf(-x) == pytest.approx(1.0 - std_normal_cdf(x),
                                                   abs=1e-12)

    def test_matches_scipy(self):
        for x in np.linspace(-8.0, 8.0, 161):
            assert std_normal_cdf(float(x)) == pytest.approx(float(ndtr(x)),
                                                             abs=1e-13)


class TestNormalQuantile:
    def test_median(self):
        assert std_normal_quantile(0.5) == pytest.approx(0.0, abs=1e-12)

    def test_table_value(self):
        assert std_normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-5)

    def test_extreme_is_finite(self):
        v = std_normal_quantile(1e-12)
        assert math.isfinite(v)
        assert v < -6.0

    @given(st.floats(1e-12, 1.0 - 1e-12))
    @settings(max_examples=300)
    def test_roundtrip(self, p):
        assert std_normal_cdf(std_normal_quantile(p)) == pytest.approx(p,
                                                                       abs=1e-9)

    def test_matches_scipy(self):
        for p in (1e-12, 1e-6, 0.001, 0.3, 0.5, 0.9, 0.999, 1 - 1e-9):
            assert std_normal_quantile(p) == pytest.approx(float(ndtri(p)),
                                                           rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.5, 1.5, math.nan])
    def test_rejects_out_of_domain(self, p):
        with pytest.raises(ValidationError):
            std_normal_quantile(p)


class TestCohen:
    def test_reference_value(self):
        assert certify_cohen(mbounds(0.975, 0.01), NOISE) == pytest.approx(
            1.959964, abs=1e-5)

    def test_gate_at_half(self):
        assert certify_cohen(mbounds(0.5, 0.1), NOISE) == 0.0
        assert certify_cohen(mbounds(0.4, 0.1), NOISE) == 0.0

    def test_softmax_mode_rejected(self):
        with pytest.raises(ValidationError):
            certify_cohen(mbounds(0.9, 0.05, SOFT), NOISE)

    def test_sigma_scaling_exact(self):
        r1 = certify_cohen(mbounds(0.83, 0.1), NoiseConfig(sigma=1.0))
        r2 = certify_cohen(mbounds(0.83, 0.1), NoiseConfig(sigma=2.0))
        assert r2 == 2.0 * r1


class TestLi:
    def test_no_separation(self):
        assert certify_li(mbounds(0.4, 0.4), NOISE) == 0.0
        assert certify_li(mbounds(0.3, 0.6), NOISE) == 0.0

    def test_matches_dense_grid(self):
        for e0, e1 in [(0.9, 0.05), (0.98, 0.005), (0.6, 0.3), (0.3, 0.1)]:
            mine = certify_li(mbounds(e0, e1), NOISE)
            ref = oracles.li_dense(e0, e1)
            assert mine == pytest.approx(ref, rel=1e-6)

    def test_sigma_scaling_exact(self):
        b = mbounds(0.9, 0.05)
        assert certify_li(b, NoiseConfig(sigma=2.0)) == \
            2.0 * certify_li(b, NoiseConfig(sigma=1.0))

    def test_softmax_mode_rejected(self):
        with pytest.raises(ValidationError):
            certify_li(mbounds(0.9, 0.05, SOFT), NOISE)

    def test_edge_e1_zero_finite(self):
        # clamped e1 keeps the e1**(1-w) term finite at the simplex edge
        r = certify_li(make_bounds(0.9, 0.0, MULT), NOISE)
        assert math.isfinite(r)
        assert r > 2.0


class TestLecuyer:
    def test_no_separation(self):
        assert certify_lecuyer(mbounds(0.4, 0.4), NOISE) == 0.0

    def test_matches_dense_grid(self):
        for e0, e1 in [(0.9, 0.05), (0.98, 0.005), (0.6, 0.2), (0.3, 0.1)]:
            mine = certify_lecuyer(mbounds(e0, e1), NOISE)
            ref = oracles.lecuyer_dense(e0, e1)
            assert mine == pytest.approx(ref, rel=1e-6)

    def test_sensitivity_scaling_exact(self):
        b = mbounds(0.9, 0.05)
        r1 = certify_lecuyer(b, NoiseConfig(sigma=1.0, delta_sens=1.0))
        r2 = certify_lecuyer(b, NoiseConfig(sigma=1.0, delta_sens=2.0))
        assert r2 == r1 / 2.0

    def test_softmax_mode_accepted(self):
        assert certify_lecuyer(mbounds(0.9, 0.05, SOFT), NOISE) > 0.0


class TestDpDelta:
    def test_vanishes_at_small_radius(self):
        assert dp_delta_required(1e-8, 0.5, NOISE) == pytest.approx(0.0,
                                                                    abs=1e-12)

    def test_reference_value(self):
        # eps = 0, L = 2 sigma: Phi(1) - Phi(-1), via the scipy oracle
        expected = float(ndtr(1.0) - ndtr(-1.0))
        assert dp_delta_required(2.0, 0.0, NOISE) == pytest.approx(expected,
                                                                   abs=1e-12)

    def test_monotone_in_radius(self):
        for eps in (0.0, 0.3, 2.0, 10.0):
            values = [dp_delta_required(L, eps, NOISE)
                      for L in np.geomspace(0.01, 20.0, 200)]
            assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValidationError):
            dp_delta_required(0.0, 0.5, NOISE)

    def test_budget_reference(self):
        assert dp_delta_budget(mbounds(0.9, 0.05), 0.0) == pytest.approx(
            0.425, abs=1e-12)

    def test_budget_infeasible_when_equal(self):
        b = mbounds(0.4, 0.4)
        for eps in (0.0, 0.1, 1.0, 5.0):
            assert dp_delta_budget(b, eps) <= 0.0

    def test_budget_decreasing_in_eps(self):
        b = mbounds(0.9, 0.05)
        values = [dp_delta_budget(b, e) for e in np.linspace(0.0, 1.4, 50)]
        assert all(b2 < b1 for b1, b2 in zip(values, values[1:]))


class TestImprovedDp:
    def test_no_separation(self):
        assert certify_improved_dp(mbounds(0.4, 0.4), NOISE) == 0.0

    def test_matches_dense_lattice(self):
        for e0, e1 in [(0.9, 0.05), (0.3, 0.1), (0.98, 0.005)]:
            mine = certify_improved_dp(mbounds(e0, e1), NOISE)
            ref = oracles.improved_dp_dense(e0, e1)
            assert mine == pytest.approx(ref, rel=1e-6)

    def test_sigma_scaling_exact(self):
        b = mbounds(0.9, 0.05)
        assert certify_improved_dp(b, NoiseConfig(sigma=2.0)) == \
            2.0 * certify_improved_dp(b, NoiseConfig(sigma=1.0))

    def test_sensitivity_scaling_exact(self):
        b = mbounds(0.9, 0.05)
        r1 = certify_improved_dp(b, NoiseConfig(sigma=1.0, delta_sens=1.0))
        assert certify_improved_dp(b, NoiseConfig(sigma=1.0, delta_sens=4.0)) \
            == r1 / 4.0

    def test_softmax_mode_accepted(self):
        assert certify_improved_dp(mbounds(0.9, 0.05, SOFT), NOISE) > 0.0

    def test_returned_radius_satisfies_constraints(self):
        # the returned L is feasible exactly at the optimizer's eps; a
        # slightly discounted radius must be feasible on an open eps window
        # that a dense grid hits
        for e0, e1 in [(0.9, 0.05), (0.55, 0.45), (0.2, 0.01)]:
            b = mbounds(e0, e1)
            radius = certify_improved_dp(b, NOISE) * (1.0 - 1e-4)
            eps = np.geomspace(1e-5, 0.5 * math.log(b.e0 / b.e1), 4000)
            feasible = False
            for e in eps:
                budget = dp_delta_budget(b, float(e))
                if budget > 0 and dp_delta_required(radius, float(e), NOISE) \
                        <= budget:
                    feasible = True
                    break
            assert feasible


@st.composite
def feasible_points(draw, min_gap=0.0):
    e0 = draw(st.floats(0.001, 0.999))
    e1 = draw(st.floats(0.0, 1.0))
    if e1 + min_gap > e0 or e0 + e1 > 1.0:
        e1 = draw(st.floats(0.0, max(0.0, min(e0 - min_gap, 1.0 - e0))))
    return e0, min(e1, e0)


class TestSharedProperties:
    @given(feasible_points())
    @settings(max_examples=60, deadline=None)
    def test_nonnegative_and_gated(self, point):
        e0, e1 = point
        b = mbounds(e0, e1)
        for mech in MechanismId:
            r = certify(mech, b, NOISE)
            assert r >= 0.0
            if e0 <= e1:
                assert r == 0.0
        if e0 <= 0.5:
            assert certify(MechanismId.COHEN, b, NOISE) == 0.0

    def test_monotone_in_evidence(self):
        # radius non-decreasing in e0 at fixed e1, non-increasing in e1
        tol = 1e-7
        for mech in MechanismId:
            e1 = 0.05
            radii = [certify(mech, mbounds(e0, e1), NOISE)
                     for e0 in np.linspace(0.06, 0.94, 23)]
            for a, b in zip(radii, radii[1:]):
                assert b >= a - tol * (1.0 + abs(a))
            e0 = 0.7
            radii = [certify(mech, mbounds(e0, e1), NOISE)
                     for e1 in np.linspace(0.0, 0.29, 23)]
            for a, b in zip(radii, radii[1:]):
                assert b <= a + tol * (1.0 + abs(a))

    def test_improved_dominates_lecuyer_small_grid(self):
        for e0 in np.linspace(0.05, 0.95, 13):
            for e1 in np.linspace(0.0, 0.45, 10):
                if e1 >= e0 or e0 + e1 > 1.0:
                    continue
                b = mbounds(float(e0), float(e1))
                assert certify_improved_dp(b, NOISE) >= \
                    certify_lecuyer(b, NOISE)

    def test_optimizer_robustness_sample(self):
        refined = OptimizerSettings(grid_points=400, bisect_tol=5e-10)
        rng = np.random.default_rng(7)
        for e0, e1 in oracles.random_feasible_points(rng, 12, min_gap=1e-3):
            b = mbounds(e0, e1)
            for mech in MechanismId:
                base = certify(mech, b, NOISE)
                alt = certify(mech, b, NOISE, refined)
                assert alt == pytest.approx(base, rel=1e-6, abs=1e-12)


class TestOptimizerSettings:
    def test_defaults(self):
        assert DEFAULT_OPTIMIZER.grid_points == 200
        assert DEFAULT_OPTIMIZER.refine_iters == 60
        assert DEFAULT_OPTIMIZER.omega_max == 500.0
        assert DEFAULT_OPTIMIZER.eps_min == 1e-4
        assert DEFAULT_OPTIMIZER.eps_cap == 50.0
        assert DEFAULT_OPTIMIZER.bisect_tol == 1e-9

    @pytest.mark.parametrize("kwargs", [
        {"grid_points": 0}, {"grid_points": 1}, {"refine_iters": 0},
        {"omega_max": 1.0}, {"eps_min": 0.0}, {"bisect_tol": 0.01},
    ])
    def test_rejects_bad_settings(self, kwargs):
        with pytest.raises(ValidationError):
            OptimizerSettings(**kwargs)
