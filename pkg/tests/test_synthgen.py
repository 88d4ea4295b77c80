import math

import numpy as np
import pytest
from scipy import stats

from credal.estimation import (
    disagreement_hard_from_labels,
    empirical_disagreement_hard,
)
from credal.measures import (
    DiscreteGrid,
    Gaussian,
    Interval,
    Sigmoid,
    SymmetricNoise,
    Threshold,
    ValidationError,
    expected_conditional_tv,
)
from credal.sets import CredalSpec, diameter_bounds
from credal.synthgen import (
    GenSeed,
    block_mechanisms,
    interval_mechanisms,
    minimax_instance,
    sample_annotated,
    sample_hard_arrays,
    sample_mixture,
)
from credal.dro import ThresholdClassifier, world_risks


class TestGenSeed:
    def test_bit_identical_replay(self):
        a = GenSeed(123).derive(4, 7)
        b = GenSeed(123).derive(4, 7)
        assert np.array_equal(a.generator().random(100), b.generator().random(100))

    def test_substreams_differ(self):
        a = GenSeed(123).derive(0)
        b = GenSeed(123).derive(1)
        assert not np.array_equal(a.generator().random(100), b.generator().random(100))

    def test_derivation_order_free(self):
        # drawing stream 5 first or last does not change its content
        direct = GenSeed(9).derive(5).generator().normal(size=10)
        for other in (0, 3, 8):
            GenSeed(9).derive(other).generator().normal(size=10)
        again = GenSeed(9).derive(5).generator().normal(size=10)
        assert np.array_equal(direct, again)


class TestSampleAnnotated:
    def test_requires_positive_n(self):
        with pytest.raises(ValidationError):
            sample_annotated(Gaussian(0, 1), [Threshold(0)], 0, "hard", GenSeed(1))

    def test_identical_labelers_never_disagree(self):
        samples = sample_annotated(
            Gaussian(0, 1), [Threshold(0.5), Threshold(0.5)], 500, "hard", GenSeed(2)
        )
        m = empirical_disagreement_hard(samples)
        assert m.eta_hat == 0.0

    def test_deterministic_disagreement_matches_quadrature(self):
        env = Gaussian(0, 1)
        labs = [Threshold(-1), Threshold(1)]
        _, labels = sample_hard_arrays(env, labs, 100_000, GenSeed(3))
        m = disagreement_hard_from_labels(labels)
        want = expected_conditional_tv(env, labs[0], labs[1])
        assert abs(m.eta_hat - want) < 0.005

    def test_soft_records_exact_beliefs(self):
        env = Gaussian(0, 1)
        labs = [Sigmoid(1.0, -0.3), Sigmoid(2.0, 0.7)]
        samples = sample_annotated(env, labs, 50, "soft", GenSeed(4))
        for s in samples:
            for lab, row in zip(labs, s.soft):
                want = lab.prob_matrix(np.asarray([s.x]))[0]
                assert row == pytest.approx(tuple(want), abs=0.0)

    def test_soft_rejects_symmetric_noise(self):
        noisy = SymmetricNoise(Threshold(0), 0.1)
        with pytest.raises(ValidationError):
            sample_annotated(Gaussian(0, 1), [noisy], 10, "soft", GenSeed(5))

    def test_conditional_independence_product_form(self):
        # joint flip frequencies of two noisy annotators factorize given truth
        env = Gaussian(0, 1)
        base = Threshold(0.0)
        e1, e2 = 0.2, 0.35
        labs = [base, SymmetricNoise(base, e1), SymmetricNoise(base, e2)]
        _, labels = sample_hard_arrays(env, labs, 100_000, GenSeed(6))
        truth = labels[:, 0]
        flip1 = labels[:, 1] != truth
        flip2 = labels[:, 2] != truth
        p11 = float(np.mean(flip1 & flip2))
        want = e1 * e2
        se = math.sqrt(want * (1 - want) / labels.shape[0])
        assert abs(p11 - want) <= 3 * se
        for flips, eps in ((flip1, e1), (flip2, e2)):
            se = math.sqrt(eps * (1 - eps) / labels.shape[0])
            assert abs(float(np.mean(flips)) - eps) <= 3 * se


class TestSampleMixture:
    def test_point_mass_matches_env(self):
        spec = CredalSpec((Gaussian(-2, 1), Gaussian(2, 1)), (Threshold(0),))
        pairs = sample_mixture(spec, [0.0, 1.0], 10_000, GenSeed(7))
        xs = np.asarray([x for x, _ in pairs])
        # KS against the selected vertex's environment
        stat, pvalue = stats.kstest(xs, "norm", args=(2, 1))
        assert pvalue > 1e-4

    def test_off_simplex_rejected(self):
        spec = CredalSpec((Gaussian(0, 1),), (Threshold(0),))
        with pytest.raises(ValidationError):
            sample_mixture(spec, [0.7, 0.7], 10, GenSeed(8))

    def test_vertex_frequencies_match_pi(self):
        spec = CredalSpec((Gaussian(-4, 0.5), Gaussian(4, 0.5)), (Threshold(0),))
        pi = [0.25, 0.75]
        pairs = sample_mixture(spec, pi, 20_000, GenSeed(9))
        xs = np.asarray([x for x, _ in pairs])
        frac_right = float(np.mean(xs > 0))
        se = math.sqrt(0.75 * 0.25 / len(pairs))
        assert abs(frac_right - 0.75) <= 4 * se

    def test_bimodal_class_rate_matches_quadrature(self):
        envs = (Gaussian(-2, 1), Gaussian(2, 1))
        lab = Sigmoid(1.0, 0.0)
        spec = CredalSpec(envs, (lab,))
        pairs = sample_mixture(spec, [0.5, 0.5], 40_000, GenSeed(10))
        ys = np.asarray([y for _, y in pairs])
        want = 0.5 * (
            expected_conditional_tv(envs[0], lab, Threshold(math.inf))
            + expected_conditional_tv(envs[1], lab, Threshold(math.inf))
        )
        # TV against the never-fires labeler is exactly P(Y=1)
        se = math.sqrt(want * (1 - want) / len(pairs))
        assert abs(float(ys.mean()) - want) <= 4 * se


class TestIntervalMechanisms:
    def test_pinned_constant_in_n_y(self):
        env = Gaussian(2, 1)
        _, eta5 = interval_mechanisms(5, env, 0.2)
        _, eta1000 = interval_mechanisms(1000, env, 0.2)
        assert eta5 == eta1000 == 0.2

    def test_quadrature_confirms_implied_eta(self):
        env = Gaussian(2, 1)
        for n_y in (2, 5, 12):
            labs, eta = interval_mechanisms(n_y, env, 0.2)
            worst = max(
                expected_conditional_tv(env, a, b)
                for i, a in enumerate(labs)
                for b in labs[i + 1 :]
            )
            assert worst == pytest.approx(eta, abs=1e-9)

    def test_all_blocks_equal_case_is_symmetric(self):
        # when the filler mass hits the anchor mass, every pairwise
        # disagreement coincides
        env = Gaussian(0, 1)
        labs, eta = interval_mechanisms(5, env, 0.2)
        vals = [
            expected_conditional_tv(env, a, b)
            for i, a in enumerate(labs)
            for b in labs[i + 1 :]
        ]
        assert max(vals) - min(vals) < 1e-9
        assert vals[0] == pytest.approx(eta, abs=1e-9)

    def test_block_masses_disjoint(self):
        env = Gaussian(0, 1)
        labs, _ = interval_mechanisms(7, env, 0.1)
        for i, a in enumerate(labs):
            for b in labs[i + 1 :]:
                assert a.b <= b.a + 1e-12 or b.b <= a.a + 1e-12

    def test_infeasible_inputs(self):
        env = Gaussian(0, 1)
        with pytest.raises(ValidationError):
            interval_mechanisms(1, env, 0.2)
        with pytest.raises(ValidationError):
            interval_mechanisms(4, env, 1.2)
        with pytest.raises(ValidationError):
            interval_mechanisms(10**9, env, 0.9999)

    def test_discrete_env_rejected(self):
        grid = DiscreteGrid((0.0, 1.0), (0.5, 0.5))
        with pytest.raises(ValidationError):
            interval_mechanisms(3, grid, 0.2)


class TestBlockMechanisms:
    def test_implied_eta_grows(self):
        env = Gaussian(0, 1)
        etas = [block_mechanisms(n_y, env, 0.012)[1] for n_y in (2, 5, 12)]
        assert etas == sorted(etas)
        assert etas[0] == pytest.approx(3 * 0.012)

    def test_quadrature_confirms_implied_eta(self):
        env = Gaussian(0, 1)
        labs, eta = block_mechanisms(6, env, 0.012)
        worst = max(
            expected_conditional_tv(env, a, b)
            for i, a in enumerate(labs)
            for b in labs[i + 1 :]
        )
        assert worst == pytest.approx(eta, abs=1e-9)

    def test_needs_two_blocks(self):
        with pytest.raises(ValidationError):
            block_mechanisms(1, Gaussian(0, 1), 0.012)

    def test_infeasible_total_mass(self):
        with pytest.raises(ValidationError):
            block_mechanisms(20, Gaussian(0, 1), 0.012)


class TestMinimaxInstance:
    def test_diameter_equals_eta(self):
        for eta in (0.1, 0.5, 0.9):
            spec = minimax_instance(eta, Gaussian(0, 1))
            rep = diameter_bounds(spec, with_exact=True)
            assert rep.exact == pytest.approx(eta, abs=1e-9)

    def test_upper_half_for_median_split(self):
        spec = minimax_instance(0.5, Gaussian(0, 1))
        firing = spec.labelers[1]
        assert firing.theta == pytest.approx(0.0, abs=1e-12)

    def test_risk_sum_identity_on_threshold_grid(self):
        env = Gaussian(0, 1)
        eta = 0.3
        spec = minimax_instance(eta, env)
        grid = np.linspace(-4, 4, 1000)
        floor = math.inf
        for theta in grid:
            wr = world_risks(ThresholdClassifier(float(theta), 1), spec)
            total = float(wr.risks.sum())
            assert total >= eta - 1e-9
            floor = min(floor, wr.worst_value)
        assert floor >= eta / 2 - 1e-3

    def test_small_eta_limit(self):
        spec = minimax_instance(1e-3, Gaussian(0, 1))
        rep = diameter_bounds(spec, with_exact=True)
        assert rep.exact == pytest.approx(1e-3, abs=1e-9)

    def test_eta_out_of_range(self):
        with pytest.raises(ValidationError):
            minimax_instance(0.0, Gaussian(0, 1))
        with pytest.raises(ValidationError):
            minimax_instance(1.0, Gaussian(0, 1))


class TestReproducibility:
    def test_sample_annotated_bit_identical(self):
        env = Gaussian(0, 1)
        labs = [Threshold(-1), Sigmoid(1, 0)]
        a = sample_annotated(env, labs, 200, "hard", GenSeed(42).derive(3))
        b = sample_annotated(env, labs, 200, "hard", GenSeed(42).derive(3))
        assert a == b

    def test_mixture_bit_identical(self):
        spec = CredalSpec((Gaussian(0, 1),), (Sigmoid(1, 0),))
        a = sample_mixture(spec, [1.0], 50, GenSeed(13))
        b = sample_mixture(spec, [1.0], 50, GenSeed(13))
        assert a == b
