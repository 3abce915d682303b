"""Weight sequences for weighted recursive trees.

Every sequence is indexed by vertex label starting at 1.  Arrays returned by
:meth:`WeightSequence.weights` and :meth:`WeightSequence.prefix` carry a
padding entry at index 0 (always 0.0) so that ``w[i]`` is the weight of
vertex ``i`` and ``W[n]`` is the sum of the first ``n`` weights.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

# Block size used when extending memoized caches of random sequences.
_BLOCK = 1 << 16

IID_DISTRIBUTIONS: dict[str, Callable] = {
    "exponential": lambda rng, size, scale=1.0: rng.exponential(scale, size),
    "uniform": lambda rng, size, low=0.0, high=1.0: rng.uniform(low, high, size),
    "gamma": lambda rng, size, shape=1.0, scale=1.0: rng.gamma(shape, scale, size),
    "lognormal": lambda rng, size, mean=0.0, sigma=1.0: rng.lognormal(mean, sigma, size),
    "pareto": lambda rng, size, alpha=3.0: 1.0 + rng.pareto(alpha, size),
}


def _extend_cache(vals, sums, n, length, extend):
    """Grow ``vals``/``sums`` to cover index ``n`` in aligned chunks.

    Chunks always span ``[k*_BLOCK, (k+1)*_BLOCK)`` so random streams do not
    depend on the order in which indices are requested.
    """
    have = len(vals)
    if n < have:
        return vals, sums
    chunks = []
    lo = have
    while lo <= n:
        hi = (lo // _BLOCK + 1) * _BLOCK
        if length is not None:
            hi = min(hi, length + 1)
        chunks.append(np.asarray(extend(lo, hi), dtype=float))
        lo = hi
    new = np.concatenate(chunks)
    return np.concatenate([vals, new]), np.concatenate([sums, sums[-1] + np.cumsum(new)])


class WeightSequence:
    """A lazily realized sequence of vertex weights with cached prefix sums.

    Use the constructors (:meth:`constant`, :meth:`polynomial`, :meth:`iid`,
    :meth:`explicit`, :func:`modified_sequence`, :func:`pat_weights`) rather
    than instantiating directly.
    """

    def __init__(self, kind: str, *, declared_gamma=None, declared_lambda=None,
                 params=None, length=None):
        self.kind = kind
        self.declared_gamma = declared_gamma
        self.declared_lambda = declared_lambda
        self.params = dict(params or {})
        self.length = length
        self._w = np.zeros(1)
        self._W = np.zeros(1)
        self._lock = threading.Lock()
        self._extend_fn: Callable[[int, int], np.ndarray] | None = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c: float = 1.0) -> "WeightSequence":
        if c <= 0:
            raise ValueError("constant weight must be positive")
        seq = cls("constant", declared_gamma=1.0, declared_lambda=float(c),
                  params={"c": float(c)})
        seq._extend_fn = lambda lo, hi: np.full(hi - lo, float(c))
        return seq

    @classmethod
    def polynomial(cls, exponent: float, coefficient: float = 1.0) -> "WeightSequence":
        """Weights ``w_i = coefficient * i**exponent`` (exponent > -1)."""
        if exponent <= -1:
            raise ValueError("exponent must exceed -1 for polynomial growth of W_n")
        seq = cls("polynomial", declared_gamma=exponent + 1.0,
                  declared_lambda=coefficient / (exponent + 1.0),
                  params={"exponent": exponent, "coefficient": coefficient})
        seq._extend_fn = lambda lo, hi: coefficient * np.arange(lo, hi, dtype=float) ** exponent
        return seq

    @classmethod
    def iid(cls, distribution: str, seed=None, **dist_params) -> "WeightSequence":
        """I.i.d. weights drawn block by block from a seeded generator.

        The first weight is redrawn until positive.
        """
        if distribution not in IID_DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {distribution!r}; "
                             f"choose from {sorted(IID_DISTRIBUTIONS)}")
        draw = IID_DISTRIBUTIONS[distribution]
        rng = np.random.default_rng(seed)
        seq = cls("iid", declared_gamma=1.0,
                  params={"distribution": distribution, **dist_params})

        def extend(lo, hi):
            out = np.asarray(draw(rng, hi - lo, **dist_params), dtype=float)
            if np.any(out < 0):
                raise ValueError("iid weight distribution produced a negative value")
            if lo == 1:
                while out[0] <= 0:
                    out[0] = draw(rng, 1, **dist_params)[0]
            return out

        seq._extend_fn = extend
        return seq

    @classmethod
    def explicit(cls, values: Sequence[float], declared_gamma=None,
                 declared_lambda=None) -> "WeightSequence":
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("explicit weights must be a non-empty 1-d list")
        if vals[0] <= 0:
            raise ValueError("the first weight must be positive")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("weights must be finite and non-negative")
        seq = cls("explicit", declared_gamma=declared_gamma,
                  declared_lambda=declared_lambda, length=vals.size)
        seq._extend_fn = lambda lo, hi: vals[lo - 1:hi - 1]
        return seq

    @classmethod
    def from_file(cls, path) -> "WeightSequence":
        """Load an explicit list stored one float per line."""
        values = [float(line) for line in Path(path).read_text().split("\n") if line.strip()]
        return cls.explicit(values)

    # -- access ---------------------------------------------------------------

    def _ensure(self, n: int) -> None:
        if n < len(self._w):
            return
        if self.length is not None and n > self.length:
            raise IndexError(f"sequence has only {self.length} weights, asked for {n}")
        with self._lock:
            self._w, self._W = _extend_cache(self._w, self._W, n, self.length, self._extend_fn)
            if self._w[1] <= 0:
                raise ValueError("the first weight must be positive")

    def weights(self, n: int) -> np.ndarray:
        """Array ``w[0..n]`` with ``w[0] = 0`` padding."""
        self._ensure(n)
        return self._w[:n + 1]

    def prefix(self, n: int) -> np.ndarray:
        """Array ``W[0..n]`` of partial sums with ``W[0] = 0``."""
        self._ensure(n)
        return self._W[:n + 1]

    def w(self, i: int) -> float:
        if i < 1:
            raise IndexError("labels start at 1")
        self._ensure(i)
        return float(self._w[i])

    def __repr__(self):
        return f"WeightSequence(kind={self.kind!r}, params={self.params})"


def partial_sum(seq: WeightSequence, n: int) -> float:
    """Return ``W_n``, the sum of the first ``n`` weights."""
    if n < 1:
        raise ValueError("n must be at least 1")
    seq._ensure(n)
    return float(seq._W[n])


def modified_sequence(seq: WeightSequence, N: int) -> WeightSequence:
    """Transfer the weight of vertices ``2..N`` onto the root.

    The result has ``w_1 = W_N``, ``w_i = 0`` for ``2 <= i <= N`` and agrees
    with ``seq`` afterwards, so partial sums coincide from ``N`` on.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if N == 1:
        return seq
    WN = partial_sum(seq, N)
    out = WeightSequence("modified", declared_gamma=seq.declared_gamma,
                         declared_lambda=seq.declared_lambda,
                         params={"base": seq, "N": N}, length=seq.length)

    def extend(lo, hi):
        base = seq.weights(hi - 1)[lo:hi].copy()
        idx = np.arange(lo, hi)
        base[idx <= N] = 0.0
        base[idx == 1] = WN
        return base

    out._extend_fn = extend
    out.declared_lambda = seq.declared_lambda
    return out


# ---------------------------------------------------------------------------
# Fitness sequences and the random weights associated with them


class FitnessSequence:
    """Non-negative fitnesses ``a_1, a_2, ...`` with partial sums ``A_n``."""

    def __init__(self, kind: str, extend: Callable[[int, int], np.ndarray],
                 declared_zeta=None, length=None):
        self.kind = kind
        self.declared_zeta = declared_zeta
        self.length = length
        self._extend_fn = extend
        self._a = np.zeros(1)
        self._A = np.zeros(1)
        self._lock = threading.Lock()

    @classmethod
    def constant(cls, a: float) -> "FitnessSequence":
        if a < 0:
            raise ValueError("fitness must be non-negative")
        return cls("constant", lambda lo, hi: np.full(hi - lo, float(a)),
                   declared_zeta=float(a) if a > 0 else None)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "FitnessSequence":
        vals = np.asarray(values, dtype=float)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("fitnesses must be finite and non-negative")
        return cls("explicit", lambda lo, hi: vals[lo - 1:hi - 1], length=vals.size)

    @classmethod
    def iid(cls, distribution: str, seed=None, **dist_params) -> "FitnessSequence":
        draw = IID_DISTRIBUTIONS[distribution]
        rng = np.random.default_rng(seed)
        return cls("iid", lambda lo, hi: np.asarray(draw(rng, hi - lo, **dist_params), float))

    def _ensure(self, n: int) -> None:
        if n < len(self._a):
            return
        if self.length is not None and n > self.length:
            raise IndexError(f"fitness sequence has only {self.length} entries")
        with self._lock:
            self._a, self._A = _extend_cache(self._a, self._A, n, self.length, self._extend_fn)
            if np.any(self._a < 0):
                raise ValueError("fitnesses must be non-negative")

    def values(self, n: int) -> np.ndarray:
        """Array ``a[0..n]`` with padding at index 0."""
        self._ensure(n)
        return self._a[:n + 1]

    def prefix(self, n: int) -> np.ndarray:
        self._ensure(n)
        return self._A[:n + 1]


def pat_weights(fit: FitnessSequence, rng=None) -> WeightSequence:
    """Random weights whose WRT has the law of the PAT with fitnesses ``fit``.

    ``W_1 = 1`` and ``W_n = prod_{k<n} 1/beta_k`` with independent
    ``beta_k ~ Beta(A_k + k, a_{k+1})``; ``Beta(x, 0)`` is the point mass at 1.
    Betas are realized through Gamma ratios so that ``1 - beta_k`` (hence
    ``w_{k+1} = W_{k+1} (1 - beta_k)``) is computed without cancellation.
    """
    rng = np.random.default_rng(rng)
    seq = WeightSequence("pat", declared_gamma=None, params={"fitness": fit})
    if fit.declared_zeta is not None:
        seq.declared_gamma = fit.declared_zeta / (fit.declared_zeta + 1.0)
    state = {"logW": 0.0}

    def extend(lo, hi):
        # produces w_lo .. w_{hi-1}; w_k needs beta_{k-1}
        ks = np.arange(lo - 1, hi - 1)  # beta index k for weight k+1
        out = np.empty(hi - lo)
        start = 0
        if lo == 1:
            out[0] = 1.0
            ks = ks[1:]
            start = 1
        if ks.size == 0:
            return out
        a = fit.values(int(ks[-1]) + 1)
        A = fit.prefix(int(ks[-1]) + 1)
        shape1 = A[ks] + ks
        shape2 = a[ks + 1]
        if np.any(shape1 <= 0):
            raise ValueError("Beta first parameter A_k + k must be positive")
        g1 = rng.standard_gamma(shape1)
        g2 = np.where(shape2 > 0, rng.standard_gamma(np.where(shape2 > 0, shape2, 1.0)), 0.0)
        tot = g1 + g2
        one_minus_beta = np.where(shape2 > 0, g2 / tot, 0.0)
        log_beta = np.where(shape2 > 0, np.log(g1) - np.log(tot), 0.0)
        logW = state["logW"] - np.cumsum(log_beta)
        state["logW"] = float(logW[-1])
        out[start:] = np.exp(logW) * one_minus_beta
        return out

    seq._extend_fn = extend
    return seq


def pat_weight_matrix(fit: FitnessSequence, n: int, draws: int, rng=None) -> np.ndarray:
    """Independent realizations of the first ``n`` PAT-equivalent weights.

    Row ``r`` holds ``w[0..n]`` (padding at 0) for draw ``r``.  Same law as
    :func:`pat_weights`, vectorized across draws for small-``n`` campaigns.
    """
    rng = np.random.default_rng(rng)
    out = np.zeros((draws, n + 1))
    out[:, 1] = 1.0
    if n < 2:
        return out
    a, A = fit.values(n), fit.prefix(n)
    ks = np.arange(1, n)
    shape1 = A[ks] + ks
    shape2 = a[ks + 1]
    g1 = rng.standard_gamma(shape1, size=(draws, n - 1))
    g2 = rng.standard_gamma(np.where(shape2 > 0, shape2, 1.0), size=(draws, n - 1))
    g2 = np.where(shape2 > 0, g2, 0.0)
    tot = g1 + g2
    logW = -np.cumsum(np.log(g1) - np.log(tot), axis=1)
    out[:, 2:] = np.exp(logW) * (g2 / tot)
    return out


# ---------------------------------------------------------------------------
# Assumption audits


@dataclass
class AssumptionThresholds:
    """Heuristic verdict thresholds; finite data cannot settle O(.) claims."""

    residual_slack: float = 0.20
    residual_floor: float = 1e-9
    tail_factor: float = 3.0


@dataclass
class AssumptionReport:
    gamma_hat: float | None = None
    lambda_hat: float | None = None
    residual_exponent_evidence: list[tuple[int, float]] = field(default_factory=list)
    h2_tail_table: list[tuple[int, float]] = field(default_factory=list)
    verdict: dict[str, bool] = field(default_factory=dict)
    thresholds: AssumptionThresholds = field(default_factory=AssumptionThresholds)
    prefix: dict[int, float] = field(default_factory=dict)

    def merge(self, other: "AssumptionReport") -> "AssumptionReport":
        return AssumptionReport(
            gamma_hat=self.gamma_hat if self.gamma_hat is not None else other.gamma_hat,
            lambda_hat=self.lambda_hat if self.lambda_hat is not None else other.lambda_hat,
            residual_exponent_evidence=self.residual_exponent_evidence or other.residual_exponent_evidence,
            h2_tail_table=self.h2_tail_table or other.h2_tail_table,
            verdict={**self.verdict, **other.verdict},
            thresholds=self.thresholds,
            prefix={**other.prefix, **self.prefix},
        )

    def to_csv(self, path_or_file) -> None:
        """Write rows ``n, W_n, residual, n_times_tail`` (blank where absent)."""
        res = dict(self.residual_exponent_evidence)
        tail = dict(self.h2_tail_table)
        ns = sorted(set(res) | set(tail))
        own = isinstance(path_or_file, (str, Path))
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            writer = csv.writer(fh)
            writer.writerow(["n", "W_n", "residual", "n_times_tail"])
            for n in ns:
                writer.writerow([n, _fmt(self.prefix.get(n)), _fmt(res.get(n)), _fmt(tail.get(n))])
        finally:
            if own:
                fh.close()


def _fmt(x):
    return "" if x is None else repr(float(x))


def _geometric_grid(lo: int, hi: int, points: int = 30) -> np.ndarray:
    grid = np.unique(np.round(np.geomspace(lo, hi, points)).astype(np.int64))
    return grid[(grid >= lo) & (grid <= hi)]


def check_h1(seq: WeightSequence, n_max: int,
             thresholds: AssumptionThresholds | None = None) -> AssumptionReport:
    """Fit ``W_n ~ lambda n**gamma`` and report relative residuals.

    The fit is least squares of ``log W_n`` on ``log n`` over ``n_max/2..n_max``.
    The verdict passes when residuals on a geometric grid never climb more than
    ``residual_slack`` above an earlier value and end below where they start.
    """
    if n_max < 100:
        raise ValueError("n_max must be at least 100 for a meaningful fit")
    th = thresholds or AssumptionThresholds()
    W = seq.prefix(n_max)
    ns = np.arange(n_max // 2, n_max + 1)
    x, y = np.log(ns), np.log(W[ns])
    slope, intercept = np.polyfit(x - x.mean(), y, 1)
    intercept -= slope * x.mean()
    gamma_hat, lambda_hat = float(slope), float(math.exp(intercept))

    grid = _geometric_grid(10, n_max)
    resid = np.abs(W[grid] - lambda_hat * grid ** gamma_hat) / grid ** gamma_hat
    shown = np.where(resid < th.residual_floor * lambda_hat, 0.0, resid)
    ok = True
    for k in range(1, len(shown)):
        if shown[k] > (1 + th.residual_slack) * shown[:k].max() and shown[k] > 0:
            ok = False
    ok = ok and shown[-1] <= shown[0]
    return AssumptionReport(
        gamma_hat=gamma_hat, lambda_hat=lambda_hat,
        residual_exponent_evidence=[(int(n), float(r)) for n, r in zip(grid, resid)],
        verdict={"H1": bool(ok)}, thresholds=th,
        prefix={int(n): float(W[n]) for n in grid},
    )


def check_h2(seq: WeightSequence, n_max: int,
             thresholds: AssumptionThresholds | None = None) -> AssumptionReport:
    """Tabulate ``n * sum_{i=n}^{n_max} (w_i/W_i)**2`` on a geometric grid.

    Passes when the table stays within ``tail_factor`` times its median.
    """
    if n_max < 100:
        raise ValueError("n_max must be at least 100")
    th = thresholds or AssumptionThresholds()
    w, W = seq.weights(n_max), seq.prefix(n_max)
    ratio2 = np.zeros(n_max + 1)
    ratio2[1:] = (w[1:] / W[1:]) ** 2
    # tail[n] = sum_{i=n}^{n_max}
    tail = np.cumsum(ratio2[::-1])[::-1]
    grid = _geometric_grid(1, max(n_max // 4, 2))
    table = grid * tail[grid]
    ok = bool(np.all(np.isfinite(table)) and table.max() <= th.tail_factor * np.median(table))
    return AssumptionReport(
        h2_tail_table=[(int(n), float(v)) for n, v in zip(grid, table)],
        verdict={"H2": ok}, thresholds=th,
        prefix={int(n): float(W[n]) for n in grid},
    )
