import itertools

import numpy as np
import pytest

from credal.measures import (
    DiscreteGrid,
    Gaussian,
    QuadratureConfig,
    Sigmoid,
    Tabular,
    Threshold,
    ValidationError,
    joint_tv_exact,
)
from credal.sets import (
    CredalSpec,
    DiameterReport,
    component_diameters,
    default_sup_domain,
    diameter_bounds,
    pairwise_bounds,
    robust_penalty,
)

from oracles import discrete_joint_pmf, discrete_spec_diameter

SIMPSON = QuadratureConfig(method="adaptive_simpson", abs_tol=1e-8)


def random_discrete_spec(rng, max_side=4, max_grid=16, max_classes=3):
    n_x = int(rng.integers(1, max_side + 1))
    n_y = int(rng.integers(1, max_side + 1))
    classes = int(rng.integers(2, max_classes + 1))
    grid_n = int(rng.integers(2, max_grid + 1))
    pts = tuple(np.sort(rng.uniform(-3, 3, grid_n)).tolist())
    envs = tuple(
        DiscreteGrid(pts, tuple(rng.dirichlet(np.ones(grid_n)).tolist())) for _ in range(n_x)
    )
    labs = tuple(
        Tabular(pts, tuple(tuple(row) for row in rng.dirichlet(np.ones(classes), size=grid_n)))
        for _ in range(n_y)
    )
    return CredalSpec(envs, labs)


class TestCredalSpec:
    def test_requires_nonempty(self):
        with pytest.raises(ValidationError):
            CredalSpec((), (Threshold(0),))

    def test_class_count_agreement(self):
        tab3 = Tabular((0.0,), ((0.2, 0.3, 0.5),))
        with pytest.raises(ValidationError):
            CredalSpec((Gaussian(0, 1),), (Threshold(0), tab3))

    def test_vertices(self):
        spec = CredalSpec((Gaussian(0, 1), Gaussian(1, 1)), (Threshold(0),))
        assert spec.vertices() == [(0, 0), (1, 0)]
        with pytest.raises(ValidationError):
            spec.check_vertex((0, 5))


class TestPairwiseBounds:
    def test_identical_vertices(self):
        spec = CredalSpec((Gaussian(0, 1),), (Threshold(0),))
        pb = pairwise_bounds(spec, (0, 0), (0, 0))
        assert pb.lower == pb.upper == pb.exact == 0.0

    def test_fixed_environment_is_exact(self):
        spec = CredalSpec((Gaussian(0, 1),), (Threshold(-1), Threshold(1)))
        pb = pairwise_bounds(spec, (0, 0), (0, 1))
        assert pb.exact == pytest.approx(0.6827, abs=1e-4)
        assert pb.lower == pb.upper == pb.exact

    def test_fixed_labeler_is_exact(self):
        spec = CredalSpec((Gaussian(0, 1), Gaussian(1, 1)), (Threshold(0),))
        pb = pairwise_bounds(spec, (0, 0), (1, 0))
        assert pb.exact == pytest.approx(0.3829, abs=1e-4)
        assert pb.lower == pb.upper == pb.exact

    def test_worked_joint_shift_example(self):
        spec = CredalSpec(
            (Gaussian(0, 1), Gaussian(1, 1)), (Threshold(-1), Threshold(1))
        )
        pb = pairwise_bounds(spec, (0, 0), (1, 1), with_exact=True)
        assert pb.cov_dist == pytest.approx(0.3829, abs=1e-4)
        assert pb.exp_dis_i == pytest.approx(0.6827, abs=1e-4)
        assert pb.exp_dis_iprime == pytest.approx(0.4772, abs=1e-4)
        assert pb.lower == pytest.approx(0.2998, abs=1e-4)
        assert pb.upper == pytest.approx(0.8601, abs=1e-4)
        assert pb.lower - 1e-9 <= pb.exact <= pb.upper + 1e-9

    def test_out_of_range_vertex(self):
        spec = CredalSpec((Gaussian(0, 1),), (Threshold(0),))
        with pytest.raises(ValidationError):
            pairwise_bounds(spec, (0, 0), (1, 0))


class TestComponentDiameters:
    def test_singleton(self):
        spec = CredalSpec((Gaussian(0, 1),), (Threshold(0),))
        assert component_diameters(spec) == (0.0, 0.0, 0.0)

    def test_pure_labeling(self):
        spec = CredalSpec((Gaussian(0, 1),), (Threshold(-1), Threshold(1)))
        eta_x, eta_star, eta_bar = component_diameters(spec)
        assert eta_x == 0.0
        assert eta_star == pytest.approx(0.6827, abs=1e-4)
        assert eta_bar == 1.0

    def test_pure_covariate(self):
        spec = CredalSpec((Gaussian(0, 1), Gaussian(1, 1)), (Threshold(0),))
        eta_x, eta_star, eta_bar = component_diameters(spec)
        assert eta_x == pytest.approx(0.3829, abs=1e-4)
        assert eta_star == 0.0
        assert eta_bar == 0.0


class TestDiameterBounds:
    def test_pure_labeling_exact_diameter(self):
        spec = CredalSpec((Gaussian(0, 1),), (Threshold(-1), Threshold(1)))
        rep = diameter_bounds(spec, with_exact=True)
        assert rep.exact == pytest.approx(0.6827, abs=1e-4)
        assert rep.lower == pytest.approx(rep.exact, abs=2e-8)
        assert rep.argmax_pair == ((0, 0), (0, 1))

    def test_disjoint_support_saturates_upper(self):
        spec = CredalSpec(
            (Gaussian(-30, 1), Gaussian(30, 1)), (Threshold(-1), Threshold(1))
        )
        rep = diameter_bounds(spec)
        assert rep.eta_x == pytest.approx(1.0, abs=1e-12)
        assert rep.upper == pytest.approx(1.0, abs=1e-9)

    def test_random_discrete_specs_sandwich_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            spec = random_discrete_spec(rng, max_side=3, max_grid=8)
            rep = diameter_bounds(spec, with_exact=True)
            brute = discrete_spec_diameter(spec)
            assert rep.lower - 1e-9 <= brute <= rep.upper + 1e-9
            assert rep.exact == pytest.approx(brute, abs=1e-9)

    def test_mixtures_never_exceed_vertex_max(self):
        # convex mixtures of vertices stay within the vertex-pair diameter
        rng = np.random.default_rng(3)
        for _ in range(25):
            spec = random_discrete_spec(rng, max_side=3, max_grid=6)
            verts = spec.vertices()
            pmfs = [discrete_joint_pmf(spec.environments[i], spec.labelers[j]) for i, j in verts]
            vertex_max = discrete_spec_diameter(spec)
            for _ in range(20):
                w1 = rng.dirichlet(np.ones(len(verts)))
                w2 = rng.dirichlet(np.ones(len(verts)))
                q1 = sum(w * p for w, p in zip(w1, pmfs))
                q2 = sum(w * p for w, p in zip(w2, pmfs))
                mix_tv = 0.5 * float(np.abs(q1 - q2).sum())
                assert mix_tv <= vertex_max + 1e-12

    def test_adding_labeler_never_shrinks(self):
        rng = np.random.default_rng(8)
        for _ in range(15):
            spec = random_discrete_spec(rng, max_side=3, max_grid=6)
            pts = spec.labelers[0].grid
            classes = spec.class_count
            extra = Tabular(
                pts,
                tuple(tuple(row) for row in rng.dirichlet(np.ones(classes), size=len(pts))),
            )
            bigger = CredalSpec(spec.environments, spec.labelers + (extra,))
            rep_small = diameter_bounds(spec, with_exact=True)
            rep_big = diameter_bounds(bigger, with_exact=True)
            assert rep_big.exact >= rep_small.exact - 1e-12
            assert rep_big.upper >= rep_small.upper - 1e-12

    def test_pure_regime_rows_have_zero_slack(self):
        spec = CredalSpec(
            (Gaussian(0, 1), Gaussian(0.5, 1.3)),
            (Sigmoid(1.0, -0.5), Sigmoid(2.0, 1.0)),
        )
        for va, vb in itertools.combinations(spec.vertices(), 2):
            i, j = va
            ip, jp = vb
            if i != ip and j != jp:
                continue
            pb = pairwise_bounds(spec, va, vb, SIMPSON, with_exact=False)
            exact = joint_tv_exact(
                spec.environments[i], spec.labelers[j],
                spec.environments[ip], spec.labelers[jp], SIMPSON,
            )
            assert abs(pb.lower - exact) <= 2 * SIMPSON.abs_tol
            assert abs(pb.upper - exact) <= 2 * SIMPSON.abs_tol

    def test_eta_eff_gating_branch(self):
        # constant conditional disagreement: the eta_star branch must bind
        # (upper never exceeds eta_x + eta_star when eta_bar is flat in x)
        pts = tuple(np.linspace(-2, 2, 9).tolist())
        flat_a = Tabular(pts, tuple((0.8, 0.2) for _ in pts))
        flat_b = Tabular(pts, tuple((0.2, 0.8) for _ in pts))
        w1 = np.full(9, 1 / 9.0)
        w2 = np.asarray([0.3, 0.2, 0.1, 0.1, 0.1, 0.1, 0.05, 0.03, 0.02])
        spec = CredalSpec(
            (DiscreteGrid(pts, tuple(w1)), DiscreteGrid(pts, tuple(w2 / w2.sum()))),
            (flat_a, flat_b),
        )
        rep = diameter_bounds(spec, with_exact=True)
        assert rep.upper <= rep.eta_x + rep.eta_star + 1e-12
        assert rep.lower - 1e-9 <= rep.exact <= rep.upper + 1e-9


class TestRobustPenalty:
    def test_zero_for_singleton(self):
        spec = CredalSpec((Gaussian(0, 1),), (Threshold(0),))
        rep = diameter_bounds(spec)
        assert robust_penalty(rep, 0.0) == 0.0

    def test_additive(self):
        rep = DiameterReport(
            eta_x=0.0, eta_star=0.6827, eta_bar=1.0, eta_eff=0.6827,
            lower=0.6827, upper=0.6827,
        )
        assert robust_penalty(rep, 0.05) == pytest.approx(0.7327)

    def test_worked_example_arithmetic(self):
        rep = DiameterReport(
            eta_x=0.3829, eta_star=0.4772, eta_bar=1.0,
            eta_eff=min(0.4772, (1 - 0.3829) * 1.0),
            lower=0.4772, upper=0.8601,
        )
        assert robust_penalty(rep, 0.0) == pytest.approx(0.8601)

    def test_negative_eps_star_rejected(self):
        rep = DiameterReport(
            eta_x=0.0, eta_star=0.0, eta_bar=0.0, eta_eff=0.0, lower=0.0, upper=0.0
        )
        with pytest.raises(ValidationError):
            robust_penalty(rep, -0.1)


class TestDiameterReportInvariants:
    def test_eta_eff_consistency_enforced(self):
        with pytest.raises(ValidationError):
            DiameterReport(
                eta_x=0.2, eta_star=0.5, eta_bar=1.0, eta_eff=0.9, lower=0.5, upper=1.0
            )

    def test_upper_dominates_lower_components(self):
        with pytest.raises(ValidationError):
            DiameterReport(
                eta_x=0.6, eta_star=0.5, eta_bar=1.0, eta_eff=0.4,
                lower=0.6, upper=0.55,
            )

    def test_default_sup_domain_covers_envs(self):
        spec = CredalSpec((Gaussian(0, 1), Gaussian(5, 2)), (Threshold(0),))
        lo, hi = default_sup_domain(spec)
        assert lo <= -8 and hi >= 21
