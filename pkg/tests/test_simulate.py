import math

import numpy as np
import pytest

from smoothcert.confidence import hoeffding_halfwidth
from smoothcert.core import ExpectationMode, NoiseConfig, ValidationError
from smoothcert.ensemble import default_ensemble
from smoothcert.mechanisms import std_normal_cdf
from smoothcert.simulate import (FixedDistribution, LinearTwoClass,
                                 SimulationRun, binomial_bounds,
                                 binomial_certify_original, count_draws,
                                 multinomial_certify, simulate_record,
                                 smoothed_truth, softmax_certify,
                                 softmax_draws, truth_radius)

MULT_CFG = default_ensemble(ExpectationMode.MULTINOMIAL)
SOFT_CFG = default_ensemble(ExpectationMode.SOFTMAX)


class TestClassifierTypes:
    def test_fixed_distribution_validates(self):
        FixedDistribution(probs=(0.7, 0.3))
        with pytest.raises(ValidationError):
            FixedDistribution(probs=(0.7, 0.2))
        with pytest.raises(ValidationError):
            FixedDistribution(probs=(1.2, -0.2))
        with pytest.raises(ValidationError):
            FixedDistribution(probs=(1.0,))

    def test_linear_validates(self):
        LinearTwoClass(weights=(1.0, 0.0))
        with pytest.raises(ValidationError):
            LinearTwoClass(weights=(0.0, 0.0))

    def test_run_validates(self):
        SimulationRun(seed=1, n=10)
        with pytest.raises(ValidationError):
            SimulationRun(seed=1, n=0)
        with pytest.raises(ValidationError):
            SimulationRun(seed=1, n=10, alpha=1.0)
        with pytest.raises(ValidationError):
            SimulationRun(seed=-1, n=10)


class TestSmoothedTruth:
    def test_fixed_is_identity(self):
        p = (0.6, 0.3, 0.1)
        assert smoothed_truth(FixedDistribution(probs=p), None, 1.0) == p

    def test_halfspace_boundary_is_even(self):
        c = LinearTwoClass(weights=(1.0, 2.0), offset=0.0)
        p0, p1 = smoothed_truth(c, (0.0, 0.0), 1.0)
        assert p0 == pytest.approx(0.5, abs=1e-15)
        assert p1 == pytest.approx(0.5, abs=1e-15)

    def test_halfspace_margin(self):
        # margin m = (w.x + b) / (sigma ||w||); p0 = Phi(m)
        c = LinearTwoClass(weights=(2.0, 0.0), offset=0.0)
        x = (1.959964, 5.0)  # w.x = 2 * 1.959964, ||w|| = 2, so m = 1.959964
        p0, _ = smoothed_truth(c, x, 1.0)
        assert p0 == pytest.approx(0.975, abs=1e-6)

    def test_sigma_scales_margin(self):
        c = LinearTwoClass(weights=(1.0,), offset=1.0)
        p_small, _ = smoothed_truth(c, (0.0,), 0.5)
        p_big, _ = smoothed_truth(c, (0.0,), 2.0)
        assert p_small == pytest.approx(std_normal_cdf(2.0), abs=1e-12)
        assert p_big == pytest.approx(std_normal_cdf(0.5), abs=1e-12)


class TestCountDraws:
    def test_degenerate_distribution(self):
        run = SimulationRun(seed=3, n=500)
        counts = count_draws(FixedDistribution(probs=(1.0, 0.0)), None, run)
        assert counts.counts == (500, 0)

    def test_frequencies_near_truth(self):
        run = SimulationRun(seed=5, n=100000)
        counts = count_draws(FixedDistribution(probs=(0.7, 0.3)), None, run)
        assert abs(counts.counts[0] / run.n - 0.7) < 0.01

    def test_deterministic_given_seed_and_stream(self):
        run = SimulationRun(seed=99, n=2000)
        c = FixedDistribution(probs=(0.5, 0.3, 0.2))
        assert count_draws(c, None, run) == count_draws(c, None, run)
        assert count_draws(c, None, run, stream=4) == \
            count_draws(c, None, run, stream=4)
        assert count_draws(c, None, run, stream=0) != \
            count_draws(c, None, run, stream=1)

    def test_halfspace_draws_match_truth(self):
        c = LinearTwoClass(weights=(1.0, -1.0), offset=0.5)
        x = (0.2, -0.1)
        run = SimulationRun(seed=17, n=100000, sigma=1.5)
        counts = count_draws(c, x, run)
        p0 = smoothed_truth(c, x, run.sigma)[0]
        assert abs(counts.counts[0] / run.n - p0) < 0.01

    def test_order_independent_streams(self):
        # per-sample streams do not depend on evaluation order
        run = SimulationRun(seed=8, n=1000)
        c = FixedDistribution(probs=(0.6, 0.4))
        forward = [count_draws(c, None, run, stream=i) for i in range(5)]
        backward = [count_draws(c, None, run, stream=i)
                    for i in reversed(range(5))]
        assert forward == backward[::-1]


class TestMultinomialCertify:
    def test_degenerate_gives_large_radius(self):
        run = SimulationRun(seed=2, n=10000, alpha=0.001)
        o = multinomial_certify(FixedDistribution(probs=(1.0, 0.0)), None, run,
                                MULT_CFG)
        assert o.predicted_class == 0
        assert not o.abstained
        assert o.radius_ensemble > 2.0

    def test_even_split_abstains(self):
        c = FixedDistribution(probs=(0.5, 0.5))
        abstained = 0
        for i in range(100):
            run = SimulationRun(seed=41, n=2000, alpha=0.01)
            o = multinomial_certify(c, None, run, MULT_CFG, stream=i)
            abstained += o.abstained
        assert abstained >= 99  # failures occur with prob <= alpha

    def test_requires_multinomial_config(self):
        run = SimulationRun(seed=2, n=100)
        with pytest.raises(ValidationError):
            multinomial_certify(FixedDistribution(probs=(0.9, 0.1)), None, run,
                                SOFT_CFG)

    def test_conservative_against_truth(self):
        # bounded expectations only shrink the radius relative to the truth
        from smoothcert.core import make_bounds
        from smoothcert.ensemble import certify_ensemble

        p = (0.97, 0.02, 0.01)
        c = FixedDistribution(probs=p)
        truth = certify_ensemble(
            make_bounds(p[0], p[1], ExpectationMode.MULTINOMIAL),
            NoiseConfig(sigma=1.0), MULT_CFG)
        run = SimulationRun(seed=13, n=100000, alpha=0.001)
        for i in range(20):
            o = multinomial_certify(c, None, run, MULT_CFG, stream=i)
            assert o.radius_ensemble <= truth.radius_ensemble


class TestSoftmaxCertify:
    def test_constant_scores_exact_bounds(self):
        run = SimulationRun(seed=1, n=100000, alpha=0.001)
        sums = softmax_draws(FixedDistribution(probs=(0.9, 0.1)), None, run)
        assert sums.sums == (0.9 * run.n, 0.1 * run.n)
        o = softmax_certify(FixedDistribution(probs=(0.9, 0.1)), None, run,
                            SOFT_CFG)
        hw = hoeffding_halfwidth(run.n, run.alpha)
        assert not o.abstained
        assert o.radius_cohen == 0.0 and o.radius_li == 0.0
        assert o.radius_improved_dp >= o.radius_lecuyer > 0.0
        # reconstruct the radius from the exact bounds
        from smoothcert.core import ExpectationBounds
        from smoothcert.mechanisms import certify_improved_dp

        b = ExpectationBounds(e0=0.9 - hw, e1=0.1 + hw,
                              mode=ExpectationMode.SOFTMAX, n=run.n,
                              alpha=run.alpha)
        assert o.radius_improved_dp == certify_improved_dp(
            b, NoiseConfig(sigma=1.0))

    def test_crossed_bounds_abstain(self):
        run = SimulationRun(seed=1, n=1000, alpha=0.01)
        o = softmax_certify(FixedDistribution(probs=(0.5, 0.5)), None, run,
                            SOFT_CFG)
        assert o.abstained

    def test_improved_dominates_lecuyer_samplewise(self):
        c = LinearTwoClass(weights=(1.0,), offset=1.4)
        run = SimulationRun(seed=23, n=20000, alpha=0.001)
        for i in range(10):
            o = softmax_certify(c, (0.0,), run, SOFT_CFG, stream=i)
            assert o.radius_improved_dp >= o.radius_lecuyer


class TestBinomialOriginal:
    def test_degenerate_never_abstains(self):
        c = FixedDistribution(probs=(1.0, 0.0))
        run = SimulationRun(seed=31, n=5000, n0=100, alpha=0.001)
        for i in range(10):
            o = binomial_certify_original(c, None, run, stream=i)
            assert not o.abstained
            assert o.predicted_class == 0
            assert o.radius_ensemble == o.radius_cohen > 0.0

    def test_deterministic(self):
        c = FixedDistribution(probs=(0.6, 0.4))
        run = SimulationRun(seed=77, n=5000, n0=50)
        assert binomial_certify_original(c, None, run, stream=3) == \
            binomial_certify_original(c, None, run, stream=3)

    def test_bounds_report_selected_class(self):
        c = FixedDistribution(probs=(0.2, 0.8))
        run = SimulationRun(seed=5, n=5000, n0=200)
        b = binomial_bounds(c, None, run)
        assert b.predicted_class == 1
        assert b.e1 == pytest.approx(1.0 - b.e0, abs=1e-12)

    def test_wrong_selection_cannot_recover(self):
        # small selection batches on a borderline input abstain far more
        # often than the one-stage multinomial procedure on the same seeds
        c = FixedDistribution(probs=(0.6, 0.4))
        run = SimulationRun(seed=101, n=2000, n0=20, alpha=0.01)
        bin_abstain = mult_abstain = 0
        for i in range(60):
            bin_abstain += binomial_certify_original(c, None, run, stream=i).abstained
            mult_abstain += multinomial_certify(c, None, run, MULT_CFG,
                                                stream=i).abstained
        assert bin_abstain > mult_abstain


class TestSimulateRecord:
    def test_multinomial_record_consistent(self):
        c = FixedDistribution(probs=(0.8, 0.15, 0.05))
        run = SimulationRun(seed=4, n=5000, alpha=0.01)
        rec = simulate_record(c, None, run, "multinomial", stream=2)
        assert rec.label == 0
        assert rec.counts is not None and rec.counts.n == 5000
        assert rec.outcome is not None and rec.bounds is not None
        again = simulate_record(c, None, run, "multinomial", stream=2)
        assert rec == again

    def test_softmax_record(self):
        c = FixedDistribution(probs=(0.8, 0.2))
        run = SimulationRun(seed=4, n=5000)
        rec = simulate_record(c, None, run, "softmax")
        assert rec.sums is not None
        assert rec.outcome.radius_cohen == 0.0

    def test_binomial_record(self):
        c = FixedDistribution(probs=(0.9, 0.1))
        run = SimulationRun(seed=4, n=5000, n0=100)
        rec = simulate_record(c, None, run, "binomial")
        assert rec.counts is not None
        assert rec.outcome.radius_li == 0.0

    def test_unknown_algorithm(self):
        run = SimulationRun(seed=4, n=10)
        with pytest.raises(ValidationError):
            simulate_record(FixedDistribution(probs=(1.0, 0.0)), None, run,
                            "bogus")


class TestConsistency:
    def test_radius_converges_to_truth_from_below(self):
        # halfspace at margin 1: the exact quantile radius equals sigma * 1
        c = LinearTwoClass(weights=(1.0,), offset=1.0)
        x = (0.0,)
        truth = truth_radius(c, x, 1.0)
        assert truth == pytest.approx(1.0, abs=1e-9)
        means = []
        for n in (1000, 10000, 100000):
            radii = []
            for i in range(30):
                run = SimulationRun(seed=600 + i, n=n, alpha=0.001)
                o = multinomial_certify(c, x, run, MULT_CFG)
                radii.append(o.radius_cohen)
            means.append(float(np.mean(radii)))
        assert means[0] < means[1] < means[2] < truth
