"""Tests for weight and fitness sequences."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from wrtlab.weights import (
    FitnessSequence,
    WeightSequence,
    check_h1,
    check_h2,
    modified_sequence,
    partial_sum,
    pat_weight_matrix,
    pat_weights,
)


class TestConstructors:
    def test_constant(self):
        seq = WeightSequence.constant(2.0)
        np.testing.assert_array_equal(seq.weights(4), [0, 2, 2, 2, 2])
        np.testing.assert_array_equal(seq.prefix(4), [0, 2, 4, 6, 8])
        assert seq.declared_gamma == 1.0

    def test_polynomial(self):
        seq = WeightSequence.polynomial(1.0, 3.0)
        np.testing.assert_allclose(seq.weights(4)[1:], [3, 6, 9, 12])
        assert seq.declared_gamma == 2.0
        assert seq.declared_lambda == 1.5

    def test_polynomial_rejects_small_exponent(self):
        with pytest.raises(ValueError):
            WeightSequence.polynomial(-1.0)

    def test_explicit_and_length(self):
        seq = WeightSequence.explicit([1.0, 0.0, 2.5])
        assert partial_sum(seq, 3) == 3.5
        with pytest.raises(IndexError):
            seq.prefix(4)

    @pytest.mark.parametrize("bad", [[0.0, 1.0], [1.0, -1.0], [1.0, math.nan], []])
    def test_explicit_rejects(self, bad):
        with pytest.raises(ValueError):
            WeightSequence.explicit(bad)

    def test_from_file(self, tmp_path):
        p = tmp_path / "w.txt"
        p.write_text("1.5\n2\n\n0.5\n")
        np.testing.assert_allclose(WeightSequence.from_file(p).weights(3)[1:], [1.5, 2, 0.5])

    def test_unknown_distribution(self):
        with pytest.raises(ValueError):
            WeightSequence.iid("cauchy")


class TestIidCache:
    def test_seed_reproducible(self):
        a = WeightSequence.iid("exponential", seed=5).weights(1000)
        b = WeightSequence.iid("exponential", seed=5).weights(1000)
        np.testing.assert_array_equal(a, b)

    def test_request_order_does_not_matter(self):
        a = WeightSequence.iid("uniform", seed=7)
        a.weights(10)
        a.weights(70_000)
        b = WeightSequence.iid("uniform", seed=7)
        np.testing.assert_array_equal(a.weights(70_000), b.weights(70_000))

    def test_prefix_consistent(self):
        seq = WeightSequence.iid("gamma", seed=1, shape=2.0)
        w, W = seq.weights(5000), seq.prefix(5000)
        np.testing.assert_allclose(np.cumsum(w), W, rtol=1e-12)
        assert w[1] > 0


class TestModified:
    @given(st.integers(1, 30), st.integers(1, 60))
    @settings(max_examples=60, deadline=None)
    def test_prefix_agrees_from_N(self, N, extra):
        seq = WeightSequence.polynomial(0.5)
        mod = modified_sequence(seq, N)
        n = N + extra
        w = mod.weights(n)
        assert w[1] == pytest.approx(partial_sum(seq, N))
        assert np.all(w[2:N + 1] == 0)
        np.testing.assert_allclose(mod.prefix(n)[N:], seq.prefix(n)[N:], rtol=1e-12)

    def test_identity_for_one(self):
        seq = WeightSequence.constant()
        assert modified_sequence(seq, 1) is seq


class TestPatWeights:
    def test_first_weight_and_positivity(self):
        fit = FitnessSequence.constant(1.0)
        seq = pat_weights(fit, rng=3)
        w = seq.weights(200)
        assert w[1] == 1.0
        assert np.all(w[2:] > 0)

    def test_zero_fitness_gives_zero_weights(self):
        seq = pat_weights(FitnessSequence.constant(0.0), rng=1)
        np.testing.assert_array_equal(seq.weights(10)[2:], 0.0)

    def test_second_weight_law(self):
        # W_2 = 1/beta_1 with beta_1 ~ Beta(A_1 + 1, a_2); with a = 1 this is Beta(2, 1),
        # so w_2 = W_2 - 1 = (1 - beta)/beta and E[beta] = 2/3.
        fit = FitnessSequence.constant(1.0)
        w = pat_weight_matrix(fit, 2, 200_000, rng=0)
        beta = 1.0 / (1.0 + w[:, 2])
        assert beta.mean() == pytest.approx(2 / 3, abs=4 * math.sqrt(1 / 18 / 200_000))

    @staticmethod
    def _expected_log_w(a, n):
        # E[log W_n] = -sum_{k<n} (psi(A_k + k) - psi(A_k + k + a))
        k = np.arange(1, n)
        return -float(np.sum(special.digamma(a * k + k) - special.digamma(a * k + k + a)))

    def test_matrix_log_prefix_mean(self):
        fit = FitnessSequence.constant(0.5)
        mat = pat_weight_matrix(fit, 6, 40_000, rng=2)
        logW = np.log(np.cumsum(mat, axis=1)[:, 1:])
        for n in range(2, 7):
            col = logW[:, n - 1]
            se = col.std(ddof=1) / math.sqrt(len(col))
            assert abs(col.mean() - self._expected_log_w(0.5, n)) <= 4 * se

    def test_sequence_log_prefix_mean(self):
        fit = FitnessSequence.constant(0.5)
        logW = np.log([pat_weights(fit, rng=k).prefix(6)[6] for k in range(300)])
        se = logW.std(ddof=1) / math.sqrt(len(logW))
        assert abs(logW.mean() - self._expected_log_w(0.5, 6)) <= 4 * se


class TestAssumptions:
    def test_h1_polynomial(self):
        rep = check_h1(WeightSequence.polynomial(0.5, 2.0), 10_000)
        assert rep.gamma_hat == pytest.approx(1.5, rel=1e-3)
        assert rep.lambda_hat == pytest.approx(2 / 1.5, rel=1e-2)
        assert rep.verdict["H1"]

    def test_h2_constant(self):
        rep = check_h2(WeightSequence.constant(), 10_000)
        assert rep.verdict["H2"]
        # n * sum_{i >= n} i^{-2} is close to 1
        assert rep.h2_tail_table[-1][1] == pytest.approx(1.0, abs=0.3)

    def test_csv(self, tmp_path):
        seq = WeightSequence.constant()
        rep = check_h1(seq, 1000).merge(check_h2(seq, 1000))
        path = tmp_path / "r.csv"
        rep.to_csv(str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "n,W_n,residual,n_times_tail"
        assert len(lines) > 10
        assert set(rep.verdict) == {"H1", "H2"}

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            check_h1(WeightSequence.constant(), 10)
