"""Exponential tilt of the spine, Z_n, and the one- and two-spine identities.

Under the tilted measure the spine's Bernoulli drivers have parameters
``p_i = e^theta q_i / (1 + (e^theta - 1) q_i)`` with ``q_i = w_i / W_i``.
``Z_n`` is kept as a log so that large ``n`` does not overflow.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spine import IdentityReport
from .trees import enumerate_wrt, mrca
from .weights import WeightSequence

MANY_TO_ONE_CAP = 8
MANY_TO_TWO_CAP = 6


@dataclass(frozen=True)
class TiltParams:
    """Arrays indexed by label (entry 0 unused)."""

    theta: float
    q: np.ndarray
    p: np.ndarray
    log_z: np.ndarray

    @property
    def n(self) -> int:
        return self.q.shape[0] - 1

    @property
    def z(self) -> np.ndarray:
        return np.exp(self.log_z)

    def z_at(self, n: int) -> float:
        return math.exp(self.log_z[n])


def tilt_params(seq: WeightSequence, theta: float, n: int) -> TiltParams:
    if not theta > 0:
        raise ValueError("theta must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    w, W = seq.weights(n), seq.prefix(n)
    q = np.zeros(n + 1)
    q[1:] = w[1:] / W[1:]
    q[1] = 1.0
    em1 = math.expm1(theta)
    p = np.zeros(n + 1)
    p[1:] = (em1 + 1.0) * q[1:] / (1.0 + em1 * q[1:])
    p[1] = 1.0
    log_z = np.zeros(n + 1)
    log_z[2:] = np.cumsum(np.log1p(em1 * q[2:]))
    return TiltParams(theta, q, p, log_z)


def spine_walk(params: TiltParams, n: int, rng=None) -> np.ndarray:
    """``H_k = sum_{i=2}^k 1{U_i <= p_i}``, returned as entries ``k-1`` for k = 1..n."""
    return spine_walks(params, n, 1, rng)[0]


def spine_walks(params: TiltParams, n: int, replicas: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    out = np.zeros((replicas, n), dtype=np.int64)
    if n >= 2:
        jumps = rng.random((replicas, n - 1)) <= params.p[2:n + 1]
        np.cumsum(jumps, axis=1, out=out[:, 1:])
    return out


def _walk_from_jumps(jumps) -> np.ndarray:
    """Heights for k = 1..n from jump indicators at i = 2..n."""
    return np.concatenate(([0], np.cumsum(jumps))).astype(np.int64)


def _bernoulli_outcomes(params_2_to_n):
    """Every 0/1 vector with its probability; zero-probability outcomes are skipped."""
    probs = list(params_2_to_n)
    for bits in itertools.product((0, 1), repeat=len(probs)):
        pr = 1.0
        for b, pi in zip(bits, probs):
            pr *= pi if b else 1.0 - pi
            if pr == 0.0:
                break
        if pr > 0.0:
            yield bits, pr


def many_to_one_check(seq: WeightSequence, theta: float, n: int,
                      F: Callable[[np.ndarray], float]) -> IdentityReport:
    """Both sides of the one-spine identity by exhaustive enumeration.

    ``F`` receives the height trajectory as an integer array of length n.
    """
    if n > MANY_TO_ONE_CAP:
        raise ValueError(f"exact many-to-one check is capped at n={MANY_TO_ONE_CAP}")
    w, W = seq.weights(n), seq.prefix(n)
    lhs = 0.0
    for et in enumerate_wrt(seq, n):
        tr = et.tree
        s = 0.0
        for i in range(1, n + 1):
            if w[i] == 0:
                continue
            s += w[i] / W[n] * math.exp(theta * tr.height[i]) * F(tr.trajectory(i))
        lhs += et.probability * s
    tp = tilt_params(seq, theta, n)
    ev = 0.0
    for bits, pr in _bernoulli_outcomes(tp.p[2:n + 1]):
        ev += pr * F(_walk_from_jumps(bits))
    return IdentityReport(lhs, tp.z_at(n) * ev)


def in_law(params: TiltParams, n: int) -> np.ndarray:
    """``P_theta(I_n = l)`` for l = 1..n, returned as entries ``l-1``."""
    pq = params.p[1:n + 1] * params.q[1:n + 1]
    # suffix products of (1 - p_i q_i) over i > l
    tail = np.ones(n)
    if n > 1:
        tail[:-1] = np.cumprod((1.0 - pq[1:])[::-1])[::-1]
    return pq * tail


@dataclass
class PairWalk:
    ell: int
    h: np.ndarray
    hbar: np.ndarray
    p_ell: np.ndarray
    ptilde: np.ndarray


def pair_law_params(params: TiltParams, ell: int, n: int) -> np.ndarray:
    """Deterministic parameters ``p^l_i`` (label-indexed, entry 0 and 1 unused)."""
    p, q = params.p[: n + 1], params.q[: n + 1]
    pl = p.copy()
    pl[ell] = 1.0
    after = slice(ell + 1, n + 1)
    denom = 1.0 - p[after] * q[after]
    with np.errstate(invalid="ignore", divide="ignore"):
        pl[after] = np.where(denom > 0, p[after] * (1.0 - q[after]) / denom, 0.0)
    return pl


def pair_walk(params: TiltParams, ell: int, n: int, rng=None) -> PairWalk:
    """Simulate ``(H^l, Hbar^l)`` from two independent uniform sequences."""
    if not 1 <= ell <= n:
        raise ValueError(f"ell must lie in 1..{n}, got {ell}")
    rng = np.random.default_rng(rng)
    pl = pair_law_params(params, ell, n)
    u = rng.random(n + 1)
    v = rng.random(n + 1)
    hj = np.zeros(n + 1, dtype=np.int64)
    hj[2:] = u[2:] <= pl[2:n + 1]
    ptilde = np.zeros(n + 1)
    ptilde[ell + 1:] = params.p[ell + 1:n + 1] * (hj[ell + 1:] == 0)
    bj = hj.copy()
    bj[ell + 1:] = v[ell + 1:] <= ptilde[ell + 1:]
    h = np.cumsum(hj[1:])
    hbar = np.cumsum(bj[1:])
    return PairWalk(ell, h, hbar, pl, ptilde)


def many_to_two_check(seq: WeightSequence, theta: float, n: int,
                      F: Callable[[np.ndarray], float],
                      f: Callable[[int], float]) -> IdentityReport:
    """Both sides of the two-spine identity by exhaustive enumeration."""
    if n > MANY_TO_TWO_CAP:
        raise ValueError(f"exact many-to-two check is capped at n={MANY_TO_TWO_CAP}")
    w, W = seq.weights(n), seq.prefix(n)
    lhs = 0.0
    for et in enumerate_wrt(seq, n):
        tr = et.tree
        live = [i for i in range(1, n + 1) if w[i] > 0]
        val = {i: math.exp(theta * tr.height[i]) * F(tr.trajectory(i)) for i in live}
        s = 0.0
        for i in live:
            for j in live:
                s += w[i] * w[j] / W[n] ** 2 * f(mrca(tr, i, j)) * val[i] * val[j]
        lhs += et.probability * s

    tp = tilt_params(seq, theta, n)
    law = in_law(tp, n)
    em1 = math.expm1(theta)
    rhs = 0.0
    for ell in range(1, n + 1):
        if law[ell - 1] == 0.0:
            continue
        pl = pair_law_params(tp, ell, n)
        inner = 0.0
        for hbits, hpr in _bernoulli_outcomes(pl[2:n + 1]):
            hj = np.array((0, *hbits), dtype=np.int64)  # index i-1 holds the jump at i
            h = np.cumsum(hj)
            weight = math.exp(theta * h[ell - 1])
            for i in range(ell + 1, n + 1):
                if hj[i - 1] == 0:
                    weight *= 1.0 + em1 * tp.q[i]
            fh = F(h)
            if fh == 0.0:
                continue
            ptil = [tp.p[i] * (hj[i - 1] == 0) for i in range(ell + 1, n + 1)]
            sub = 0.0
            for bbits, bpr in _bernoulli_outcomes(ptil):
                bj = hj.copy()
                bj[ell:] = bbits
                sub += bpr * F(np.cumsum(bj))
            inner += hpr * weight * fh * sub
        rhs += law[ell - 1] * f(ell) * inner
    return IdentityReport(lhs, tp.z_at(n) * rhs)


def functional_battery(n: int) -> list[tuple[str, Callable[[np.ndarray], float]]]:
    """Twenty trajectory functionals: constants, indicators and barrier patterns.

    Each takes ``h`` with ``h[k-1]`` the height at label k.
    """
    k = np.arange(1, n + 1)
    half = max(1, n // 2)
    return [
        ("one", lambda h: 1.0),
        ("constant_2.5", lambda h: 2.5),
        ("final_height", lambda h: float(h[-1])),
        ("final_height_sq", lambda h: float(h[-1]) ** 2),
        ("final_height_zero", lambda h: float(h[-1] == 0)),
        ("final_height_high", lambda h: float(h[-1] >= n // 2)),
        ("stays_below_one", lambda h: float(np.all(h <= 1))),
        ("below_half_slope", lambda h: float(np.all(h - k / 2.0 <= 1.0))),
        ("midpoint_is_one", lambda h: float(h[half - 1] == 1)),
        ("exp_minus_final", lambda h: math.exp(-float(h[-1]))),
        ("jumps_first_half", lambda h: float(h[half - 1])),
        ("flat_second_half", lambda h: float(h[-1] == h[half - 1])),
        ("double_barrier", lambda h: float(np.all(h[:half] <= 1) and h[-1] >= 2)),
        ("sum_of_heights", lambda h: float(h.sum())),
        ("below_third_slope", lambda h: float(np.all(h <= k / 3.0 + 1.0))),
        ("inverse_product", lambda h: float(np.prod(1.0 / (1.0 + h)))),
        ("early_jump", lambda h: float(n >= 2 and h[1] == 1)),
        ("final_even", lambda h: float(h[-1] % 2 == 0)),
        ("max_excess", lambda h: float(np.max(h - k / 2.0))),
        ("above_half_slope", lambda h: float(np.all(h >= (k - 1) / 2.0))),
    ]


def label_battery(n: int) -> list[tuple[str, Callable[[int], float]]]:
    """Functions of the meeting label used with the two-spine identity."""
    return [
        ("one", lambda l: 1.0),
        ("is_root", lambda l: float(l == 1)),
        ("label", lambda l: float(l)),
        ("late", lambda l: float(2 * l >= n)),
    ]
