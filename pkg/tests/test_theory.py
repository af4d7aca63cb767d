import math

import numpy as np
import pytest

from lrcc import (
    LabelVector,
    MixtureSpec,
    ObservationSet,
    ProblemSpec,
    SolverOptions,
    WeightedGraph,
    alm_solve,
    ari,
    asymptotic_check,
    chi_cdf,
    cluster_means,
    extract_clusters,
    gaussian_weights,
    gen_mixture_with_counts,
    knn_graph,
    prediction_bound,
    random_low_rank_means,
    recovery_check,
    region_classify,
)
from lrcc.rng import make_rng, normal


def scalar_obs(values):
    return ObservationSet(np.asarray(values, dtype=float).reshape(-1, 1, 1))


def complete_unit_graph(n):
    heads, tails = np.triu_indices(n, k=1)
    return WeightedGraph(n, heads, tails, np.ones(heads.size))


class TestClusterMeans:
    def test_singletons(self, rng):
        obs = ObservationSet(normal(rng, (3, 2, 2)))
        labels = LabelVector(np.array([0, 1, 2]))
        np.testing.assert_array_equal(cluster_means(obs, labels), obs.data)

    def test_pair_mean(self):
        obs = scalar_obs([1.0, 3.0])
        labels = LabelVector(np.array([0, 0]))
        np.testing.assert_allclose(cluster_means(obs, labels), [[[2.0]]])

    def test_against_naive_summation(self, rng):
        obs = ObservationSet(normal(rng, (12, 3, 2)))
        lab = np.array([0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2])
        labels = LabelVector(lab)
        means = cluster_means(obs, labels)
        for alpha in range(3):
            ref = sum(obs.data[i] for i in range(12) if lab[i] == alpha) / 4
            assert np.abs(means[alpha] - ref).max() <= 1e-12


class TestRecoveryCheck:
    def hand_instance(self):
        obs = scalar_obs([0.0, 0.2, 1.0, 1.2])
        labels = LabelVector(np.array([0, 0, 1, 1]))
        return obs, labels, complete_unit_graph(4)

    def test_hand_computed_quantities(self):
        obs, labels, graph = self.hand_instance()
        report = recovery_check(obs, labels, graph, gamma1=0.05, gamma2=0.1)
        assert np.all(report.eta_max == 0.0)
        assert abs(report.gamma1_min - 0.1) <= 1e-12
        assert abs(report.delta - 1.0) <= 1e-12
        assert abs(report.w_max - 4.0) <= 1e-12
        assert report.condition_a
        # condition (c) is 4*gamma1 + gamma2 < 1
        assert report.condition_c == (4 * 0.05 + 0.1 < 1.0)

    def test_identical_samples_single_cluster(self):
        obs = scalar_obs([2.0, 2.0, 2.0])
        labels = LabelVector(np.zeros(3, dtype=int))
        report = recovery_check(obs, labels, complete_unit_graph(3), 1.0, 0.0)
        assert report.gamma1_min == 0.0
        assert report.delta is None
        assert report.condition_c is None
        assert bool(report.clique.all())

    def test_uniform_complete_graph_eta_zero(self, rng):
        obs = ObservationSet(normal(rng, (9, 2, 2)))
        labels = LabelVector(np.repeat([0, 1, 2], 3))
        report = recovery_check(obs, labels, complete_unit_graph(9), 0.1, 0.1)
        assert np.all(report.eta_max == 0.0)

    def test_missing_intra_edge_blows_up_gamma1_min(self):
        obs = scalar_obs([0.0, 0.2, 5.0])
        labels = LabelVector(np.array([0, 0, 1]))
        graph = WeightedGraph(3, np.array([0, 1]), np.array([2, 2]), np.ones(2))
        report = recovery_check(obs, labels, graph, 1.0, 0.0)
        assert not report.clique[0]
        assert report.gamma1_min == np.inf
        assert not report.condition_a


class TestRegionClassify:
    def make_report(self):
        obs, labels, graph = TestRecoveryCheck().hand_instance()
        return recovery_check(obs, labels, graph, 0.05, 0.1)

    def test_perfect(self):
        report = self.make_report()
        assert region_classify(report, 0.12, 0.2) == "perfect"

    def test_merge_only_for_huge_gamma1(self):
        report = self.make_report()
        assert region_classify(report, 100.0, 0.0) == "merge-only"

    def test_distinguish_only_below_gamma1_min(self):
        report = self.make_report()
        assert region_classify(report, 0.01, 0.1) == "distinguish-only"

    def test_neither(self):
        report = self.make_report()
        assert region_classify(report, 0.01, 5.0) == "neither"


def folded_normal_cdf_quadrature(t):
    """P(|Z| <= t) via composite Simpson on the halved normal density."""
    if t == 0:
        return 0.0
    steps = 4000
    xs = np.linspace(0.0, t, steps + 1)
    pdf = np.sqrt(2.0 / np.pi) * np.exp(-0.5 * xs * xs)
    h = t / steps
    weights = np.ones(steps + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(h / 3.0 * (weights @ pdf))


class TestChiCdf:
    def test_zero(self):
        for d in (1, 2, 17):
            assert chi_cdf(0.0, d) == 0.0

    def test_two_degrees_closed_form(self):
        for t in (0.3, 1.0, 2.7):
            assert abs(chi_cdf(t, 2) - (1 - math.exp(-t * t / 2))) <= 1e-12

    def test_one_degree_against_quadrature(self):
        for t in (0.2, 0.9, 1.7, 3.0):
            ref = folded_normal_cdf_quadrature(t)
            assert abs(chi_cdf(t, 1) - ref) <= 1e-10
            assert abs(chi_cdf(t, 1) - math.erf(t / math.sqrt(2))) <= 1e-12

    def test_monotone_and_bounded(self):
        ts = np.linspace(0, 12, 200)
        for d in (1, 3, 10, 100):
            vals = [chi_cdf(t, d) for t in ts]
            assert all(0.0 <= v <= 1.0 for v in vals)
            assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_validates_arguments(self):
        with pytest.raises(ValueError):
            chi_cdf(-1.0, 2)
        with pytest.raises(ValueError):
            chi_cdf(1.0, 0)


class TestAsymptoticCheck:
    def make_instance(self, rng, noise=0.05):
        means = random_low_rank_means(2, 4, 3, rank=2, seed=21, scale=3.0)
        spec = MixtureSpec(means, np.array([0.5, 0.5]), noise, np.array([2, 2]))
        obs, labels = gen_mixture_with_counts(spec, [6, 6], seed=22)
        return obs, means, labels

    def test_everything_inside_tube_complete_graph(self, rng):
        obs, means, _ = self.make_instance(rng)
        graph = complete_unit_graph(obs.n)
        t = 50.0
        report = asymptotic_check(obs, means, 0.05, graph, t, 1e-3, 0.0, 0.0)
        assert bool(report.clique.all())
        # every sample within t*sigma of its own mean
        assert all(len(m) >= 6 for m in report.memberships)

    def test_c1_with_zero_penalties(self, rng):
        obs, means, _ = self.make_instance(rng)
        graph = complete_unit_graph(obs.n)
        report = asymptotic_check(obs, means, 0.05, graph, 10.0, 1e-3, 0.0, 0.0)
        assert report.condition_c1

    def test_eta_matches_enumeration_oracle(self):
        # 4 scalar samples, means 0 and 10; t*sigma = 1 -> memberships {0,1}, {2,3}
        obs = scalar_obs([0.0, 0.5, 10.0, 10.5])
        means = np.array([[[0.0]], [[10.0]]])
        heads, tails = np.triu_indices(4, k=1)
        weights = np.array([1.0, 0.5, 0.5, 0.25, 0.75, 1.0])
        graph = WeightedGraph(4, heads, tails, weights)
        report = asymptotic_check(obs, means, 1.0, graph, 1.0, 0.01, 0.1, 0.0)
        wfull = np.zeros((4, 4))
        for (i, j), w in zip(zip(heads, tails), weights):
            wfull[i, j] = wfull[j, i] = w
        # cluster 0 = {0, 1}: outside = {2, 3}
        w01 = wfull[0, 1]
        eta_ref = (abs(wfull[0, 2] - wfull[1, 2]) + abs(wfull[0, 3] - wfull[1, 3])) / w01
        assert abs(report.eta_max[0] - eta_ref) <= 1e-12
        w23 = wfull[2, 3]
        eta_ref1 = (abs(wfull[2, 0] - wfull[3, 0]) + abs(wfull[2, 1] - wfull[3, 1])) / w23
        assert abs(report.eta_max[1] - eta_ref1) <= 1e-12

    def test_epsilon_range_enforced(self, rng):
        obs, means, _ = self.make_instance(rng)
        graph = complete_unit_graph(obs.n)
        with pytest.raises(ValueError, match="epsilon"):
            asymptotic_check(obs, means, 0.05, graph, 10.0, 0.9, 0.0, 0.0)

    def test_probability_forms_note(self, rng):
        obs, means, _ = self.make_instance(rng)
        graph = complete_unit_graph(obs.n)
        report = asymptotic_check(obs, means, 0.05, graph, 10.0, 1e-3, 0.0, 0.0)
        assert "2^(-(F*pi-eps)n)" in report.notes
        assert np.all(report.prob_merge >= 0) and np.all(report.prob_merge <= 1)
        assert report.prob_distinguish.shape == (2, 2)


class TestPredictionBound:
    def test_zero_noise_zero_structure(self):
        graph = complete_unit_graph(4)
        x0 = np.zeros(4 * 6)
        report = prediction_bound(x0, graph, sigma=0.0, gamma1=0.5, gamma2=2.0,
                                  n=4, d1=3, d2=2)
        assert report.rhs_total == 0.0

    def test_threshold_formula(self):
        # sigma=1, d=4, |E|=2, sigma_min(B)=1 -> 4 sqrt(4 log 8);
        # the path on 3 nodes has Laplacian spectrum {0, 1, 3}, so sigma_min(B)=1
        g = WeightedGraph(3, np.array([0, 1]), np.array([1, 2]), np.ones(2))
        report = prediction_bound(np.zeros(3 * 4), g, 1.0, 1.0, 1.0, 3, 2, 2)
        assert abs(report.sigma_min_b - 1.0) <= 1e-12
        assert abs(report.gamma1_threshold - 4 * np.sqrt(4 * np.log(8))) <= 1e-12

    def test_monotone_in_parameters(self, rng):
        obs = ObservationSet(normal(rng, (8, 3, 2)))
        graph = knn_graph(obs, 3)
        x0 = normal(rng, 8 * 6)
        base = prediction_bound(x0, graph, 0.5, 1.0, 1.0, 8, 3, 2).rhs_total
        assert prediction_bound(x0, graph, 0.5, 2.0, 1.0, 8, 3, 2).rhs_total >= base
        assert prediction_bound(x0, graph, 0.5, 1.0, 2.0, 8, 3, 2).rhs_total >= base
        assert prediction_bound(x0, graph, 1.0, 1.0, 1.0, 8, 3, 2).rhs_total >= base

    def test_weight_assumption_flag(self, rng):
        obs = ObservationSet(normal(rng, (6, 2, 2)))
        g = knn_graph(obs, 2)
        assert prediction_bound(np.zeros(24), g, 1, 1, 1, 6, 2, 2).weight_assumption_ok
        g_small = g.with_weights(np.full(g.m, 0.25))
        assert not prediction_bound(np.zeros(24), g_small, 1, 1, 1, 6, 2, 2).weight_assumption_ok

    def test_lhs_filled_with_estimate(self, rng):
        obs = ObservationSet(normal(rng, (6, 2, 2)))
        g = knn_graph(obs, 2)
        x0 = normal(rng, 24)
        xhat = x0 + 0.1
        report = prediction_bound(x0, g, 0.5, 1.0, 1.0, 6, 2, 2, xhat=xhat)
        assert abs(report.lhs - (0.01 * 24) / (2 * 4 * 6)) <= 1e-12


class TestRecoveryEndToEnd:
    def test_perfect_region_recovers_exactly(self):
        # small instance where the theorem's conditions verifiably hold
        means = random_low_rank_means(3, 6, 4, rank=2, seed=31, scale=4.0)
        spec_m = MixtureSpec(means, np.full(3, 1 / 3), 0.05, np.full(3, 2))
        obs, labels = gen_mixture_with_counts(spec_m, [8, 8, 8], seed=32)
        graph = gaussian_weights(obs, knn_graph(obs, obs.n - 1), 0.5)
        probe = recovery_check(obs, labels, graph, 1.0, 0.0)
        assert probe.condition_a, "instance construction should satisfy (a)"
        gamma1 = probe.gamma1_min * 1.05
        gamma2 = 0.25 * (probe.delta - gamma1 * probe.w_max) / np.sqrt(obs.d2)
        assert gamma2 > 0, "perfect region should be nonempty for this seed"
        report = recovery_check(obs, labels, graph, gamma1, gamma2)
        assert report.region == "perfect"
        spec = ProblemSpec.from_observations(obs, graph, gamma1, gamma2)
        state, solve_report = alm_solve(spec, SolverOptions(tol=1e-8))
        assert solve_report.success
        result = extract_clusters(spec, state, 1e-6)
        assert ari(result.labels, labels.labels) == 1.0
