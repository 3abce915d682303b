"""Tests for the tilted spine walk and the one- and two-spine identities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wrtlab.tilt import (
    functional_battery,
    in_law,
    label_battery,
    many_to_one_check,
    many_to_two_check,
    pair_law_params,
    pair_walk,
    spine_walks,
    tilt_params,
)
from wrtlab.trees import enumerate_wrt
from wrtlab.weights import WeightSequence


def _random_seq(seed, n, zeros=False):
    rng = np.random.default_rng(seed)
    w = rng.exponential(1.0, n) + 0.05
    if zeros:
        w[1::3] = 0.0
    return WeightSequence.explicit(w)


class TestTiltParams:
    def test_constant_weights_partition_function(self):
        theta, n = 1.0, 30
        tp = tilt_params(WeightSequence.constant(), theta, n)
        expected = math.prod(1 + (math.e ** theta - 1) / i for i in range(2, n + 1))
        assert tp.z_at(n) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_partition_function_is_tilted_mass(self, n):
        # Z_n = E[sum_i (w_i / W_n) e^{theta h_i}]
        seq, theta = _random_seq(n, n), 0.7
        w, W = seq.weights(n), seq.prefix(n)
        mass = sum(et.probability * sum(w[i] / W[n] * math.exp(theta * et.tree.height[i])
                                        for i in range(1, n + 1))
                   for et in enumerate_wrt(seq, n))
        assert tilt_params(seq, theta, n).z_at(n) == pytest.approx(mass, rel=1e-13)

    @given(st.floats(0.01, 5.0), st.integers(2, 200))
    @settings(max_examples=50, deadline=None)
    def test_parameters_in_unit_interval(self, theta, n):
        tp = tilt_params(WeightSequence.polynomial(0.3), theta, n)
        assert np.all((tp.p[1:] >= tp.q[1:]) & (tp.p[1:] <= 1.0))
        assert np.all(np.diff(tp.log_z[1:]) >= 0)

    def test_large_n_no_overflow(self):
        tp = tilt_params(WeightSequence.constant(), 8.0, 10**6)
        assert np.isfinite(tp.log_z[-1]) and tp.log_z[-1] > 700

    def test_rejects_nonpositive_theta(self):
        with pytest.raises(ValueError):
            tilt_params(WeightSequence.constant(), 0.0, 5)


class TestWalks:
    def test_mean_height(self):
        tp = tilt_params(_random_seq(1, 40), 1.2, 40)
        H = spine_walks(tp, 40, 50_000, rng=1)
        assert H[:, 0].max() == 0
        mean, sd = H[:, -1].mean(), H[:, -1].std() / math.sqrt(50_000)
        assert abs(mean - tp.p[2:41].sum()) <= 4 * sd

    @pytest.mark.parametrize("n", [1, 2, 7, 30])
    def test_meeting_law_sums_to_one(self, n):
        tp = tilt_params(_random_seq(n, n), 0.9, n)
        law = in_law(tp, n)
        assert law.shape == (n,)
        assert law.sum() == pytest.approx(1.0, abs=1e-13)
        assert np.all(law >= 0)

    def test_pair_walk_structure(self):
        n = 25
        tp = tilt_params(_random_seq(4, n), 1.0, n)
        rng = np.random.default_rng(2)
        for ell in (1, 5, 25):
            for _ in range(200):
                pw = pair_walk(tp, ell, n, rng)
                np.testing.assert_array_equal(pw.h[:ell], pw.hbar[:ell])
                jumps_h = np.diff(pw.h[ell - 1:])
                jumps_b = np.diff(pw.hbar[ell - 1:])
                assert not np.any((jumps_h == 1) & (jumps_b == 1))
                if ell > 1:
                    assert pw.h[ell - 1] - pw.h[ell - 2] == 1

    def test_pair_walk_marginal(self):
        n, ell = 15, 4
        tp = tilt_params(_random_seq(9, n), 1.0, n)
        pl = pair_law_params(tp, ell, n)
        rng = np.random.default_rng(0)
        hs = np.array([pair_walk(tp, ell, n, rng).h for _ in range(20_000)])
        jumps = np.diff(hs, axis=1).mean(axis=0)
        se = np.sqrt(pl[2:] * (1 - pl[2:]) / 20_000) + 1e-12
        assert np.all(np.abs(jumps - pl[2:]) <= 5 * se)

    def test_pair_walk_rejects_label(self):
        tp = tilt_params(_random_seq(0, 5), 1.0, 5)
        with pytest.raises(ValueError):
            pair_walk(tp, 6, 5)


class TestManyToOne:
    @pytest.mark.parametrize("n", range(2, 8))
    def test_battery(self, n):
        seq = _random_seq(20 + n, n)
        battery = functional_battery(n)
        assert len(battery) == 20
        for name, F in battery:
            rep = many_to_one_check(seq, 1.1, n, F)
            assert rep.holds(1e-10), (name, rep)

    def test_zero_weights(self):
        n = 7
        for name, F in functional_battery(n):
            assert many_to_one_check(_random_seq(3, n, zeros=True), 0.5, n, F).holds(1e-10), name

    def test_cap(self):
        with pytest.raises(ValueError):
            many_to_one_check(_random_seq(0, 9), 1.0, 9, lambda h: 1.0)


class TestManyToTwo:
    @pytest.mark.parametrize("n", range(2, 6))
    def test_battery(self, n):
        seq = _random_seq(40 + n, n)
        for name, F in functional_battery(n):
            for lname, f in label_battery(n):
                rep = many_to_two_check(seq, 0.8, n, F, f)
                assert rep.holds(1e-10), (name, lname, rep)

    def test_six_vertices_with_zero_weights(self):
        n = 6
        seq = _random_seq(5, n, zeros=True)
        for name, F in functional_battery(n)[:8]:
            assert many_to_two_check(seq, 1.3, n, F, lambda l: 1.0 + l).holds(1e-10), name

    def test_detects_wrong_functional_pairing(self):
        # a mismatch must be visible: compare F against a shifted copy
        n = 4
        seq = _random_seq(1, n)
        good = many_to_two_check(seq, 1.0, n, lambda h: float(h[-1]), lambda l: 1.0)
        bad = many_to_two_check(seq, 1.0, n, lambda h: float(h[-1]) + 1.0, lambda l: 1.0)
        assert abs(good.lhs - bad.lhs) > 1e-3
