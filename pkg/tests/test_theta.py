"""Tests for the theta solver and derived constants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wrtlab.theta import AsymptoticConstants, solve_theta, theta_equation, x_n

# Roots frozen from a 40-digit arbitrary-precision root finder.
FROZEN_ROOTS = {
    0.1: 2.101002997276972630797896930244427651722,
    0.5: 1.278464542761073795109358739022980155439,
    2.0: 0.7680390470134655652556835260775479909068,
    10.0: 0.3916587152665681294385667284546851391192,
}


class TestSolveTheta:
    def test_unit_gamma_gives_one(self):
        c = solve_theta(1.0)
        assert abs(c.theta - 1.0) <= 1e-10
        assert abs(c.speed - math.e) <= 1e-10

    @pytest.mark.parametrize("gamma, root", sorted(FROZEN_ROOTS.items()))
    def test_frozen_roots(self, gamma, root):
        np.testing.assert_allclose(solve_theta(gamma).theta, root, rtol=1e-13)

    @pytest.mark.parametrize("gamma", np.round(np.arange(0.1, 10.01, 0.1), 10))
    def test_residual_on_grid(self, gamma):
        assert solve_theta(gamma).residual <= 1e-12

    @given(st.floats(min_value=1e-3, max_value=1e3))
    @settings(max_examples=200, deadline=None)
    def test_residual_property(self, gamma):
        c = solve_theta(gamma)
        assert c.theta > 0
        assert abs(theta_equation(c.theta, gamma)) <= 1e-12

    @given(st.floats(min_value=0.05, max_value=20), st.floats(min_value=0.05, max_value=20))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_gamma(self, g1, g2):
        if g1 < g2:
            assert solve_theta(g1).theta >= solve_theta(g2).theta

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_invalid_gamma(self, bad):
        with pytest.raises(ValueError):
            solve_theta(bad)


class TestConstants:
    def test_relations(self):
        c = solve_theta(0.5)
        assert c.speed == pytest.approx(0.5 * math.exp(c.theta), rel=1e-14)
        assert c.logcorr == pytest.approx(1.5 / c.theta, rel=1e-14)
        assert c.diameter_speed == pytest.approx(2 * c.speed, rel=1e-14)
        assert c.diameter_logcorr == pytest.approx(3 / c.theta, rel=1e-14)

    def test_lines_format(self):
        lines = solve_theta(1.0).as_lines()
        assert "theta=1.000000000000" in lines
        assert all("=" in line for line in lines)

    def test_centering(self):
        c = solve_theta(1.0)
        n = 1000
        expected = 7 - math.e * math.log(n) + 1.5 * math.log(math.log(n))
        assert c.centered_height(7, n) == pytest.approx(expected)
        assert isinstance(c, AsymptoticConstants)


class TestXn:
    def test_floor_of_log_log(self):
        # theta = 1: floor(1.5 log log n)
        for n in (3, 10, 1000, 10**6):
            assert x_n(1.0, n) == math.floor(1.5 * math.log(math.log(n)))

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            x_n(1.0, 2)
