"""The exponent theta attached to a growth exponent gamma, and derived constants."""

from __future__ import annotations

import math
from dataclasses import dataclass

RESIDUAL_TOL = 1e-12


def theta_equation(theta: float, gamma: float) -> float:
    """``1 + gamma (e^theta - 1 - theta e^theta)``; equals 1 at 0, strictly decreasing after."""
    et = math.exp(theta)
    return 1.0 + gamma * (et - 1.0 - theta * et)


@dataclass(frozen=True)
class AsymptoticConstants:
    gamma: float
    theta: float
    speed: float
    logcorr: float
    diameter_speed: float
    diameter_logcorr: float

    @property
    def residual(self) -> float:
        return abs(theta_equation(self.theta, self.gamma))

    def centered_height(self, h, n):
        """Height minus ``speed log n`` plus ``logcorr log log n``."""
        ln = math.log(n)
        return h - self.speed * ln + self.logcorr * math.log(ln)

    def centered_diameter(self, d, n):
        ln = math.log(n)
        return d - self.diameter_speed * ln + self.diameter_logcorr * math.log(ln)

    def as_lines(self) -> list[str]:
        return [f"{name}={getattr(self, name):.12f}" for name in
                ("gamma", "theta", "speed", "logcorr", "diameter_speed", "diameter_logcorr")]


def solve_theta(gamma: float) -> AsymptoticConstants:
    """Return the positive root theta of ``1 + gamma (e^t - 1 - t e^t) = 0``.

    The root is bracketed by doubling an upper end until the sign flips, then
    refined by Newton steps that fall back to bisection whenever a step would
    leave the bracket.  Convergence is declared on the residual.
    """
    if not gamma > 0 or not math.isfinite(gamma):
        raise ValueError(f"gamma must be a positive real, got {gamma!r}")
    lo, hi = 0.0, 1.0
    while theta_equation(hi, gamma) > 0:
        lo, hi = hi, 2.0 * hi
    t = 0.5 * (lo + hi)
    for _ in range(200):
        f = theta_equation(t, gamma)
        if abs(f) <= RESIDUAL_TOL * 0.01:
            break
        if f > 0:
            lo = t
        else:
            hi = t
        # derivative of the equation in theta
        df = -gamma * t * math.exp(t)
        step = t - f / df if df != 0 else None
        t = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-300:
            break
    # Polish: pick the best of t and its neighbours in the final bracket.
    best = min((t, lo, hi), key=lambda c: abs(theta_equation(c, gamma)) if c > 0 else math.inf)
    if abs(theta_equation(best, gamma)) > RESIDUAL_TOL:
        raise ArithmeticError(f"theta solver did not reach residual {RESIDUAL_TOL} for gamma={gamma}")
    speed = gamma * math.exp(best)
    return AsymptoticConstants(
        gamma=gamma, theta=best, speed=speed, logcorr=3.0 / (2.0 * best),
        diameter_speed=2.0 * speed, diameter_logcorr=3.0 / best,
    )


def x_n(theta: float, n: int) -> int:
    """``floor(3/(2 theta) * log log n)``; defined for ``n >= 3``."""
    if n < 3:
        raise ValueError("x_n needs n >= 3 so that log log n > 0")
    if theta <= 0:
        raise ValueError("theta must be positive")
    return int(math.floor(3.0 / (2.0 * theta) * math.log(math.log(n))))
