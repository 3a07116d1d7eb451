import itertools

import numpy as np
import pytest

from learnsketch import gen, kmeans
from learnsketch import sketch as sk
from learnsketch.matlin import InvalidInputError

from conftest import GOLD_M


def brute_force(A, k):
    n = A.shape[0]
    best = np.inf
    for labels in itertools.product(range(k), repeat=n):
        if len(set(labels)) == k:
            best = min(best, kmeans.kmeans_cost(A, np.array(labels), k))
    return best


def double_loop(A, labels, k):
    total = 0.0
    for c in range(k):
        members = [A[i] for i in range(len(labels)) if labels[i] == c]
        if not members:
            continue
        mu = np.mean(members, axis=0)
        for x in members:
            total += float(np.sum((x - mu) ** 2))
    return total


class TestCost:
    def test_two_points(self):
        assert kmeans.kmeans_cost(np.array([[0.0, 0], [0, 2]]), [0, 0]) == pytest.approx(2)

    def test_singletons(self, rng):
        A = rng.standard_normal((5, 3))
        assert kmeans.kmeans_cost(A, np.arange(5)) == pytest.approx(0, abs=1e-20)

    def test_golden(self):
        assert kmeans.kmeans_cost(GOLD_M, [0, 0, 1, 1]) == pytest.approx(10.5, abs=1e-12)
        assert brute_force(GOLD_M, 2) == pytest.approx(6.0, abs=1e-12)

    def test_double_loop_oracle(self, rng):
        A = rng.standard_normal((12, 3))
        labels = rng.integers(0, 3, 12)
        assert kmeans.kmeans_cost(A, labels, 3) == pytest.approx(double_loop(A, labels, 3), rel=1e-10)

    def test_empty_cluster_contributes_zero(self, rng):
        A = rng.standard_normal((6, 2))
        assert kmeans.kmeans_cost(A, [0] * 6, 3) == pytest.approx(kmeans.kmeans_cost(A, [0] * 6, 1))

    def test_means_are_optimal(self, rng):
        A = rng.standard_normal((20, 4))
        labels = rng.integers(0, 3, 20)
        base = kmeans.kmeans_cost(A, labels, 3)
        means = kmeans.cluster_means(A, labels, 3)
        for _ in range(100):
            assert base <= kmeans.cost_with_centers(A, labels, means + 0.1 * rng.standard_normal(means.shape))

    @pytest.mark.parametrize("labels", [[0, 1, 3], [0, -1, 1], [0, 1], [0.5, 1, 1]])
    def test_invalid_labels(self, labels):
        with pytest.raises(InvalidInputError):
            kmeans.kmeans_cost(np.eye(3), labels, 3)


class TestLloyd:
    def test_k1_centroid(self, rng):
        A = rng.standard_normal((30, 4))
        cl = kmeans.lloyd_kmeanspp(A, 1, seed=0)
        assert np.allclose(cl.centers[0], A.mean(axis=0))
        assert cl.cost == pytest.approx(np.sum((A - A.mean(axis=0)) ** 2))

    def test_separated_pairs_optimal(self):
        A = np.array([[0.0, 0], [0.1, 0], [10, 10], [10, 10.2], [0, 0.1], [10.1, 10]])
        opt = brute_force(A, 2)
        for seed in range(10):
            assert kmeans.lloyd_kmeanspp(A, 2, seed=seed).cost == pytest.approx(opt)

    def test_trace_monotone(self):
        for seed in range(20):
            A = np.random.default_rng(seed).standard_normal((80, 5))
            trace = kmeans.lloyd_kmeanspp(A, 6, seed=seed).trace
            assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))

    def test_deterministic(self, rng):
        A = rng.standard_normal((50, 3))
        a, b = kmeans.lloyd_kmeanspp(A, 4, seed=7), kmeans.lloyd_kmeanspp(A, 4, seed=7)
        assert np.array_equal(a.assignments, b.assignments) and a.cost == b.cost

    def test_all_clusters_used(self, rng):
        A = np.vstack([np.zeros((10, 2)), rng.standard_normal((3, 2)) + 5])
        cl = kmeans.lloyd_kmeanspp(A, 4, seed=0)
        assert len(set(cl.assignments.tolist())) == 4

    def test_cost_invariant(self, rng):
        A = rng.standard_normal((40, 3))
        cl = kmeans.lloyd_kmeanspp(A, 3, seed=1)
        assert cl.cost == pytest.approx(kmeans.cost_with_centers(A, cl.assignments, cl.centers), rel=1e-9)

    def test_k_too_large(self):
        with pytest.raises(InvalidInputError):
            kmeans.lloyd_kmeanspp(np.eye(3), 4)

    def test_recovers_clusters(self):
        A, truth = gen.gen_gaussian_clusters(90, 10, 3, 40.0, seed=4)
        labels = kmeans.lloyd_kmeanspp(A, 3, seed=0).assignments
        # same partition up to relabelling
        pairs = set(zip(truth.tolist(), labels.tolist()))
        assert len(pairs) == 3


class TestSketchKmeans:
    def test_full_rank_sketch_matches_direct(self):
        for seed in range(10):
            r = np.random.default_rng(seed)
            A = r.standard_normal((40, 6))
            S = sk.random_countsketch(20, 40, r)
            V = kmeans.projection_basis(sk.apply_left(S, A))
            assert V.shape[1] == 6
            direct = kmeans.lloyd_kmeanspp(A @ V, 3, seed=seed)
            cl = kmeans.sketch_kmeans(A, S, 3, seed=seed)
            assert np.array_equal(cl.assignments, direct.assignments)
            assert cl.cost == pytest.approx(kmeans.lloyd_kmeanspp(A, 3, seed=seed).cost, rel=1e-9)

    def test_k1_any_sketch(self, rng):
        A = rng.standard_normal((30, 5))
        S = sk.random_countsketch(2, 30, rng)
        assert kmeans.sketch_kmeans(A, S, 1, seed=0).cost == pytest.approx(
            kmeans.lloyd_kmeanspp(A, 1, seed=0).cost)

    def test_centers_in_original_space(self, rng):
        A = rng.standard_normal((30, 5))
        cl = kmeans.sketch_kmeans(A, sk.random_countsketch(4, 30, rng), 2, seed=0)
        assert cl.centers.shape == (2, 5)
        assert cl.cost == pytest.approx(kmeans.kmeans_cost(A, cl.assignments, 2))

    def test_zero_sketch(self, rng):
        A = rng.standard_normal((10, 3))
        cl = kmeans.sketch_kmeans(A, sk.zero_countsketch(3, 10), 2, seed=0)
        assert cl.cost >= kmeans.lloyd_kmeanspp(A, 2, seed=0).cost - 1e-9

    def test_never_beats_brute_force(self):
        for seed in range(5):
            r = np.random.default_rng(seed)
            A = r.standard_normal((7, 4))
            cl = kmeans.sketch_kmeans(A, sk.random_countsketch(3, 7, r), 2, seed=seed)
            assert cl.cost >= brute_force(A, 2) - 1e-9

    def test_close_to_unsketched(self):
        good = 0
        for seed in range(100):
            A, _ = gen.gen_gaussian_clusters(200, 32, 4, 8.0, seed=seed)
            S = sk.random_countsketch(32, 200, seed + 1000)
            ref = kmeans.lloyd_kmeanspp(A, 4, seed=seed).cost
            good += kmeans.sketch_kmeans(A, S, 4, seed=seed).cost <= 1.5 * ref
        assert good >= 90

    def test_shape_error(self):
        with pytest.raises(InvalidInputError):
            kmeans.sketch_kmeans(np.eye(4), sk.random_countsketch(2, 5, 0), 2)

    @pytest.mark.slow
    def test_stacking_mean_monotone(self):
        base, ext = [], []
        for seed in range(100):
            r = np.random.default_rng(seed)
            A, _ = gen.gen_gaussian_clusters(60, 16, 4, 6.0, r)
            S, T = sk.random_countsketch(8, 60, r), sk.random_countsketch(4, 60, r)
            base.append(kmeans.sketch_kmeans(A, S, 4, seed=seed).cost)
            ext.append(kmeans.sketch_kmeans(A, sk.stack(S, T), 4, seed=seed).cost)
        assert np.mean(ext) <= 1.05 * np.mean(base)


class TestApproxCheck:
    def test_tie(self, rng):
        A, _ = gen.gen_gaussian_clusters(60, 8, 3, 6.0, seed=1)
        S = sk.random_countsketch(12, 60, 2)
        _, label = kmeans.approx_check_kmeans(A, S, S, 3, seed=0)
        assert label == kmeans.LEARNED

    def test_zero_learned_loses(self):
        for seed in range(100):
            A, _ = gen.gen_gaussian_clusters(200, 32, 4, 8.0, seed=seed)
            SC = sk.random_countsketch(32, 200, seed)
            SL = sk.CountSketch(32, 200, SC.p, np.zeros(200))
            _, label = kmeans.approx_check_kmeans(A, SL, SC, 4, seed=seed)
            assert label == kmeans.CLASSICAL

    def test_returns_minimum(self, rng):
        A, _ = gen.gen_gaussian_clusters(80, 10, 3, 3.0, seed=2)
        SL, SC = sk.random_countsketch(2, 80, 0), sk.random_countsketch(9, 80, 1)
        cl, _, costs = kmeans.approx_check_kmeans(A, SL, SC, 3, seed=0, return_costs=True)
        assert cl.cost == min(costs.values())
