"""Joint construction of a WRT with two distinguished vertices.

At each step the pair of Bernoulli drivers (B, B~) decides where the new
vertex goes: (1,0) under D, (0,1) under D~, (1,1) under D with both marks
moving to it, and (0,0) under an independent ``J`` with law ``w_k / W_m``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as K
from .trees import Tree, enumerate_wrt
from .weights import WeightSequence

EXACT_CAP = 7


@dataclass
class SpineRun:
    tree: Tree
    d_label: int
    dt_label: int
    b: np.ndarray
    bt: np.ndarray

    @property
    def i_meet(self) -> int:
        """Largest k with B_k = B~_k = 1 (B_1 = B~_1 = 1 by convention)."""
        both = np.nonzero((self.b[1:] == 1) & (self.bt[1:] == 1))[0]
        return int(both[-1]) + 1

    @property
    def d_height_traj(self) -> np.ndarray:
        """``h(D_k) = sum_{i=2}^k B_i`` for k = 1..n (entry k-1)."""
        return np.cumsum(self.b[1:]) - 1

    def dt_height_traj(self) -> np.ndarray:
        """``h(D~_n(k))`` rebuilt from the drivers and the meeting label."""
        ell = self.i_meet
        traj = self.d_height_traj.copy()
        after = np.cumsum(self.bt[ell + 1:])
        traj[ell:] = traj[ell - 1] + after
        return traj


def _driver_params(seq: WeightSequence, n: int, theta=None):
    w, W = seq.weights(n), seq.prefix(n)
    q = np.zeros(n + 1)
    q[1:] = w[1:] / W[1:]
    if theta is None:
        pB = q
    else:
        et = math.exp(theta)
        pB = et * q / (1.0 + (et - 1.0) * q)
    return np.ascontiguousarray(pB), np.ascontiguousarray(q), np.ascontiguousarray(W)


def grow_with_spines(seq: WeightSequence, n: int, rng=None, theta=None) -> SpineRun:
    """One run of the coupled construction.

    With ``theta`` set, B_i is drawn from the tilted parameter ``p_i``
    instead of ``w_i / W_i`` (the spinal change of measure).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(rng)
    pB, q, W = _driver_params(seq, n, theta)
    parent, d, dt, b, bt = K.spine_run(rng, pB, q, W, n)
    h, deg = K.heights_outdeg(parent)
    return SpineRun(Tree(parent, h, deg), int(d), int(dt), b, bt)


def spine_batch(seq: WeightSequence, n: int, replicas: int, rng=None, theta=None):
    """Vectorized runs: arrays ``(parents, d, dt, i_meet)``, one row per run."""
    rng = np.random.default_rng(rng)
    pB, q, W = _driver_params(seq, n, theta)
    return K.spine_batch(rng, pB, q, W, n, replicas)


# -- exact enumeration of the driving randomness -------------------------------


def enumerate_spine_outcomes(seq: WeightSequence, n: int):
    """Yield ``(probability, parent_list, d, dt)`` over all driver outcomes.

    Enumerates (B_i, B~_i) for i = 2..n and J_m in the (0,0) case; outcomes of
    zero probability are skipped.
    """
    if n > EXACT_CAP:
        raise ValueError(f"exact driver enumeration is capped at n={EXACT_CAP}")
    w, W = seq.weights(n), seq.prefix(n)

    def rec(m, prob, parents, d, dt):
        if m == n:
            yield prob, tuple(parents), d, dt
            return
        i = m + 1
        q = w[i] / W[i]
        cases = ((1, 0, q * (1 - q)), (0, 1, (1 - q) * q), (1, 1, q * q), (0, 0, (1 - q) ** 2))
        for bi, bti, pc in cases:
            if pc == 0.0:
                continue
            if (bi, bti) == (1, 0):
                yield from rec(i, prob * pc, parents + [d], i, dt)
            elif (bi, bti) == (0, 1):
                yield from rec(i, prob * pc, parents + [dt], d, i)
            elif (bi, bti) == (1, 1):
                yield from rec(i, prob * pc, parents + [d], i, i)
            else:
                for j in range(1, m + 1):
                    pj = w[j] / W[m]
                    if pj > 0:
                        yield from rec(i, prob * pc * pj, parents + [j], d, dt)

    yield from rec(1, 1.0, [], 1, 1)


@dataclass
class IdentityReport:
    lhs: float
    rhs: float
    lhs_stderr: float = 0.0

    def __post_init__(self):
        self.lhs, self.rhs = float(self.lhs), float(self.rhs)
        self.lhs_stderr = float(self.lhs_stderr)

    @property
    def discrepancy(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def relative_discrepancy(self) -> float:
        if self.lhs == self.rhs:
            return 0.0
        return self.discrepancy / max(abs(self.rhs), 1e-300)

    def holds(self, rtol: float = 1e-10) -> bool:
        return self.relative_discrepancy <= rtol


def verify_two_point_identity(seq: WeightSequence, n: int,
                              phi: Callable[[Tree, int, int], float],
                              mode: str = "exact", replicas: int = 100_000,
                              rng=None) -> IdentityReport:
    """Compare ``E[phi(T_n, D_n, D~_n)]`` with the weighted double sum over vertices.

    The left side is computed by enumerating the drivers (``mode="exact"``)
    or by simulation (``mode="mc"``); the right side always by enumerating
    trees.
    """
    trees = enumerate_wrt(seq, n)
    W = seq.prefix(n)
    w = seq.weights(n)
    rhs = 0.0
    for et in trees:
        inner = 0.0
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                inner += w[i] * w[j] / W[n] ** 2 * phi(et.tree, i, j)
        rhs += et.probability * inner
    if mode == "exact":
        cache: dict[tuple, Tree] = {}
        lhs = 0.0
        for prob, par, d, dt in enumerate_spine_outcomes(seq, n):
            tree = cache.get(par)
            if tree is None:
                tree = cache[par] = Tree.from_parent_list(par)
            lhs += prob * phi(tree, d, dt)
        return IdentityReport(lhs, rhs)
    if mode == "mc":
        parents, ds, dts, _ = spine_batch(seq, n, replicas, rng)
        vals = np.empty(replicas)
        for r in range(replicas):
            vals[r] = phi(Tree.from_parents(parents[r]), int(ds[r]), int(dts[r]))
        return IdentityReport(float(vals.mean()), rhs, float(vals.std(ddof=1) / math.sqrt(replicas)))
    raise ValueError(f"unknown mode {mode!r}")


def verify_one_point_identity(seq: WeightSequence, n: int,
                              psi: Callable[[Tree, int], float]) -> IdentityReport:
    """Exact check of ``E[psi(T_n, D_n)] = E[sum_i (w_i/W_n) psi(T_n, u_i)]``."""
    w, W = seq.weights(n), seq.prefix(n)
    rhs = sum(et.probability * sum(w[i] / W[n] * psi(et.tree, i) for i in range(1, n + 1))
              for et in enumerate_wrt(seq, n))
    lhs = 0.0
    for prob, par, d, _ in enumerate_spine_outcomes(seq, n):
        lhs += prob * psi(Tree.from_parent_list(par), d)
    return IdentityReport(lhs, rhs)


def joint_law_tree_marks(seq: WeightSequence, n: int) -> dict[tuple, float]:
    """Exact law of (parent list, D_n, D~_n) from the driver enumeration."""
    law: dict[tuple, float] = defaultdict(float)
    for prob, par, d, dt in enumerate_spine_outcomes(seq, n):
        law[(par, d, dt)] += prob
    return dict(law)
