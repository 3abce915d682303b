"""Tests for the two-distinguished-vertex construction."""

import math
from collections import defaultdict

import numpy as np
import pytest
from scipy import stats

from wrtlab.spine import (
    IdentityReport,
    enumerate_spine_outcomes,
    grow_with_spines,
    joint_law_tree_marks,
    spine_batch,
    verify_one_point_identity,
    verify_two_point_identity,
)
from wrtlab.trees import Tree, enumerate_wrt, mrca


def _random_seq(seed, n):
    from wrtlab.weights import WeightSequence
    rng = np.random.default_rng(seed)
    w = rng.exponential(1.0, n)
    w[0] += 0.1
    return WeightSequence.explicit(w)


PHIS = {
    "one": lambda t, i, j: 1.0,
    "same": lambda t, i, j: float(i == j),
    "heights": lambda t, i, j: float(t.height[i] * t.height[j]),
    "meet_depth": lambda t, i, j: float(t.height[mrca(t, i, j)]),
    "leaf_first": lambda t, i, j: float(t.outdeg[i] == 0),
    "labels": lambda t, i, j: float(i + 2 * j),
}


class TestExactLaw:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_total_probability(self, n):
        seq = _random_seq(n, n)
        assert sum(p for p, *_ in enumerate_spine_outcomes(seq, n)) == pytest.approx(1.0, abs=1e-13)

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_tree_marginal_and_mark_law(self, n):
        seq = _random_seq(10 + n, n)
        w, W = seq.weights(n), seq.prefix(n)
        law = joint_law_tree_marks(seq, n)
        tree_law = defaultdict(float)
        d_law = defaultdict(float)
        for (par, d, dt), p in law.items():
            tree_law[par] += p
            d_law[(par, d)] += p
        for et in enumerate_wrt(seq, n):
            par = tuple(int(x) for x in et.tree.parent[2:])
            assert tree_law[par] == pytest.approx(et.probability, abs=1e-14)
            for i in range(1, n + 1):
                assert d_law[(par, i)] == pytest.approx(et.probability * w[i] / W[n], abs=1e-14)

    def test_marks_independent_given_tree(self):
        n = 5
        seq = _random_seq(3, n)
        w, W = seq.weights(n), seq.prefix(n)
        law = joint_law_tree_marks(seq, n)
        probs = {tuple(int(x) for x in e.tree.parent[2:]): e.probability for e in enumerate_wrt(seq, n)}
        for (par, d, dt), p in law.items():
            assert p == pytest.approx(probs[par] * w[d] * w[dt] / W[n] ** 2, abs=1e-14)

    def test_cap(self):
        with pytest.raises(ValueError):
            list(enumerate_spine_outcomes(_random_seq(0, 8), 8))


class TestIdentities:
    @pytest.mark.parametrize("n", range(2, 8))
    @pytest.mark.parametrize("name", sorted(PHIS))
    def test_two_point_exact(self, n, name):
        rep = verify_two_point_identity(_random_seq(100 + n, n), n, PHIS[name])
        assert rep.holds(1e-10), rep

    @pytest.mark.parametrize("n", range(2, 7))
    def test_one_point_exact(self, n):
        psi = lambda t, i: float(t.height[i]) ** 2 + (t.outdeg[i] == 0)
        assert verify_one_point_identity(_random_seq(n, n), n, psi).holds(1e-10)

    def test_two_point_monte_carlo(self):
        seq = _random_seq(7, 6)
        rep = verify_two_point_identity(seq, 6, PHIS["meet_depth"], mode="mc", replicas=40_000, rng=1)
        assert rep.discrepancy <= 4 * rep.lhs_stderr

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            verify_two_point_identity(_random_seq(0, 3), 3, PHIS["one"], mode="bogus")

    def test_report_is_float(self):
        rep = IdentityReport(np.float64(1.0), 1)
        assert type(rep.lhs) is float and type(rep.rhs) is float
        assert rep.relative_discrepancy == 0.0


class TestSimulation:
    def test_meeting_label_is_mrca(self):
        seq = _random_seq(2, 300)
        parents, ds, dts, meet = spine_batch(seq, 300, 2000, rng=4)
        for r in range(2000):
            tree = Tree.from_parents(parents[r])
            assert meet[r] == mrca(tree, int(ds[r]), int(dts[r]))

    def test_trajectories_from_drivers(self):
        seq = _random_seq(8, 200)
        rng = np.random.default_rng(0)
        for _ in range(200):
            run = grow_with_spines(seq, 200, rng)
            np.testing.assert_array_equal(run.d_height_traj, run.tree.trajectory(run.d_label))
            np.testing.assert_array_equal(run.dt_height_traj(), run.tree.trajectory(run.dt_label))
            assert run.i_meet == mrca(run.tree, run.d_label, run.dt_label)

    def test_meeting_label_law(self):
        # P(I_n = l) = q_l^2 prod_{i > l} (1 - q_i^2), with q_i = w_i / W_i
        n = 12
        seq = _random_seq(6, n)
        w, W = seq.weights(n), seq.prefix(n)
        q = w / np.where(W > 0, W, 1.0)
        law = np.array([q[l] ** 2 * np.prod(1 - q[l + 1:] ** 2) for l in range(1, n + 1)])
        assert law.sum() == pytest.approx(1.0)
        _, _, _, meet = spine_batch(seq, n, 100_000, rng=3)
        counts = np.bincount(meet, minlength=n + 1)[1:]
        keep = law > 0
        assert stats.chisquare(counts[keep], law[keep] * 100_000).pvalue > 1e-3

    def test_tilted_driver_frequency(self):
        seq = _random_seq(1, 50)
        w, W = seq.weights(50), seq.prefix(50)
        theta = 0.8
        q = w[1:] / W[1:]
        p = math.e ** theta * q / (1 + (math.e ** theta - 1) * q)
        runs = [grow_with_spines(seq, 50, k, theta=theta) for k in range(4000)]
        freq = np.mean([r.b[2:] for r in runs], axis=0)
        se = np.sqrt(p[1:] * (1 - p[1:]) / 4000) + 1e-12
        assert np.all(np.abs(freq - p[1:]) <= 5 * se)
