"""Monte Carlo campaigns: heights, diameters, tails, Q_n^(N) and PAT/WRT equivalence.

Every replica draws from its own generator, derived from the master seed,
the tree size and the replica index, so results are reproducible and do not
depend on how replicas are spread over worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import _kernels as Kn
from .rw import barrier_probability_exact, load_renewal_table, spec_from_params, time_change
from .theta import AsymptoticConstants, solve_theta, x_n
from .tilt import TiltParams, tilt_params
from .trees import collapse, grow_wrt, iter_parent_arrays, pat_tree_probability
from .weights import (FitnessSequence, WeightSequence, check_h1, modified_sequence,
                      pat_weight_matrix)

MIN_N = 8
QUANTILE_LEVELS = (0.01, 0.10, 0.50, 0.90, 0.99)
CSV_COLUMNS = ("experiment", "n", "replica_count", "stat_name", "value", "ci_low", "ci_high")
Z95 = 1.959963984540054
MODELS = ("constant", "polynomial", "iid", "pat")


# -- configuration ----------------------------------------------------------------


def _parse_ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    if text.startswith("pow2:"):
        lo, hi = (int(x) for x in text[5:].split(":"))
        return tuple(2 ** k for k in range(lo, hi + 1))
    return tuple(int(x) for x in text.replace(" ", "").split(",") if x)


@dataclass(frozen=True)
class ExperimentConfig:
    """Campaign settings, readable from ``key = value`` lines.

    ``n_grid`` and ``x_grid`` accept comma lists; ``n_grid`` also accepts
    ``pow2:a:b`` for ``2^a, ..., 2^b``.
    """

    experiment: str = "height"
    model: str = "constant"
    weight: float = 1.0
    exponent: float = 0.0
    coefficient: float = 1.0
    distribution: str = "exponential"
    weights_seed: int = 0
    fitness: float = 1.0
    n_grid: tuple[int, ...] = (1024,)
    replicas: int = 100
    seed: int = 0
    gamma: float | None = None
    K: int = 5
    N: int = 10
    t: int = 20
    x_grid: tuple[int, ...] = tuple(range(1, 9))
    threads: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")
        if list(self.n_grid) != sorted(self.n_grid) or len(set(self.n_grid)) != len(self.n_grid):
            raise ValueError("n grid must be strictly ascending")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            values[key] = val
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**{k: _coerce(types[k], v) for k, v in values.items()})

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(), **overrides)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    # -- model resolution --

    def model_key(self) -> tuple:
        return (self.model, self.weight, self.exponent, self.coefficient,
                self.distribution, self.weights_seed, self.fitness)

    def weight_sequence(self) -> WeightSequence:
        return _weight_sequence(self.model_key())

    def resolved_gamma(self) -> float:
        if self.gamma is not None:
            return float(self.gamma)
        if self.model == "pat":
            return self.fitness / (self.fitness + 1.0) if self.fitness > 0 else math.nan
        seq = self.weight_sequence()
        if seq.declared_gamma is not None:
            return float(seq.declared_gamma)
        return float(check_h1(seq, 1 << 16).gamma_hat)

    def constants(self) -> AsymptoticConstants:
        return solve_theta(self.resolved_gamma())


def _coerce(tp, value):
    if not isinstance(value, str):
        return value
    tp = str(tp)
    if "tuple" in tp:
        return _parse_ints(value)
    if tp.startswith("float"):
        return None if value.lower() == "none" else float(value)
    if tp.startswith("int"):
        return int(value)
    if tp.startswith("str") and value.lower() == "none":
        return None
    return value


@functools.lru_cache(maxsize=16)
def _weight_sequence(key) -> WeightSequence:
    model, weight, exponent, coefficient, distribution, wseed, fitness = key
    if model == "constant":
        return WeightSequence.constant(weight)
    if model == "polynomial":
        return WeightSequence.polynomial(exponent, coefficient)
    if model == "iid":
        return WeightSequence.iid(distribution, wseed)
    raise ValueError("the PAT model has no fixed weight sequence")


def replica_rng(seed: int, n: int, index: int, stream: int = 0) -> np.random.Generator:
    """Generator for replica ``index`` at size ``n``, independent of scheduling.

    ``stream`` separates independent uses within one replica.
    """
    key = (int(n), int(index)) if stream == 0 else (int(n), int(index), int(stream))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


# -- replica execution --------------------------------------------------------------


def _grow_chunk(cfg: ExperimentConfig, n: int, lo: int, hi: int, want_diameter: bool):
    heights = np.empty(hi - lo, np.int64)
    diams = np.full(hi - lo, -1, np.int64)
    if cfg.model == "pat":
        a = np.ascontiguousarray(FitnessSequence.constant(cfg.fitness).values(max(n, 2)))
    elif cfg.model != "constant":
        W = np.ascontiguousarray(cfg.weight_sequence().prefix(n))
    for r in range(lo, hi):
        rng = replica_rng(cfg.seed, n, r)
        if cfg.model == "constant":
            h, d = Kn.urt_height_diameter(rng, n, want_diameter)
        elif cfg.model == "pat":
            parent = Kn.pat_parents(rng, a, n)
            hh, _ = Kn.heights_outdeg(parent)
            h = hh.max()
            d = Kn.diameter_from_parents(parent) if want_diameter else -1
        else:
            h, d = Kn.wrt_height_diameter(rng, W, n, want_diameter)
        heights[r - lo] = h
        diams[r - lo] = d
    return heights, diams


def _chunks(total: int, parts: int):
    size = max(1, math.ceil(total / parts))
    return [(lo, min(total, lo + size)) for lo in range(0, total, size)]


def grow_replicas(cfg: ExperimentConfig, n: int, want_diameter: bool = False):
    """Heights (and diameters, else -1) of ``cfg.replicas`` trees of size ``n``."""
    if cfg.threads == 1:
        return _grow_chunk(cfg, n, 0, cfg.replicas, want_diameter)
    parts = _chunks(cfg.replicas, 4 * cfg.threads)
    with ProcessPoolExecutor(cfg.threads) as ex:
        futs = [ex.submit(_grow_chunk, cfg, n, lo, hi, want_diameter) for lo, hi in parts]
        res = [f.result() for f in futs]
    return np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res])


# -- summaries --------------------------------------------------------------------------


@dataclass
class SummaryStats:
    """Per-n summaries of a centered statistic; ``raw_*`` refer to the uncentered values."""

    stat_name: str
    n: np.ndarray
    replicas: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    ci_half: np.ndarray
    quantiles: np.ndarray  # shape (len(n), len(QUANTILE_LEVELS))
    raw_mean: np.ndarray
    raw_ci_half: np.ndarray

    @classmethod
    def from_samples(cls, stat_name, ns, centered, raw) -> "SummaryStats":
        reps = np.array([len(c) for c in centered])
        mean = np.array([np.mean(c) for c in centered])
        var = np.array([np.var(c, ddof=1) if len(c) > 1 else 0.0 for c in centered])
        q = np.array([np.quantile(c, QUANTILE_LEVELS) for c in centered])
        raw_mean = np.array([np.mean(r) for r in raw])
        raw_var = np.array([np.var(r, ddof=1) if len(r) > 1 else 0.0 for r in raw])
        return cls(stat_name, np.asarray(ns), reps, mean, var, Z95 * np.sqrt(var / reps), q,
                   raw_mean, Z95 * np.sqrt(raw_var / reps))

    def inter_quantile_range(self) -> np.ndarray:
        """Spread between the 1% and 99% quantiles, per n."""
        return self.quantiles[:, -1] - self.quantiles[:, 0]

    def median(self) -> np.ndarray:
        return self.quantiles[:, QUANTILE_LEVELS.index(0.50)]

    def rows(self, experiment: str) -> list[tuple]:
        out = []
        for i, n in enumerate(self.n):
            R = int(self.replicas[i])
            m, h = float(self.mean[i]), float(self.ci_half[i])
            out.append((experiment, int(n), R, f"{self.stat_name}_mean", m, m - h, m + h))
            out.append((experiment, int(n), R, f"{self.stat_name}_var", float(self.var[i]), "", ""))
            for lev, qv in zip(QUANTILE_LEVELS, self.quantiles[i]):
                out.append((experiment, int(n), R, f"{self.stat_name}_q{lev:g}", float(qv), "", ""))
            rm, rh = float(self.raw_mean[i]), float(self.raw_ci_half[i])
            out.append((experiment, int(n), R, f"{self.stat_name}_raw_mean", rm, rm - rh, rm + rh))
        return out


@dataclass
class Tightness:
    """Tightness proxy: spread of the (1%, 99%) range over the grid, and the last median step."""

    range_variation: float
    median_drift: float

    def passes(self, range_band: float = 2.0, drift_band: float = 1.5) -> bool:
        return self.range_variation <= range_band and self.median_drift <= drift_band


def tightness(summary: SummaryStats) -> Tightness:
    iqr = summary.inter_quantile_range()
    med = summary.median()
    drift = float(abs(med[-1] - med[-2])) if len(med) > 1 else 0.0
    return Tightness(float(iqr.max() - iqr.min()), drift)


def first_order_slope(summary: SummaryStats) -> tuple[float, float]:
    """Least-squares slope of the mean raw statistic against ``log n``, with its standard error."""
    x = np.log(summary.n.astype(float))
    y = summary.raw_mean
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def _check_grid(cfg: ExperimentConfig):
    if cfg.n_grid[0] < MIN_N:
        raise ValueError(f"centered statistics need n >= {MIN_N}")


def height_expansion(cfg: ExperimentConfig) -> SummaryStats:
    """Centered height ``h - speed log n + logcorr log log n`` on the n grid."""
    _check_grid(cfg)
    c = cfg.constants()
    cen, raw = [], []
    for n in cfg.n_grid:
        h, _ = grow_replicas(cfg, n, False)
        raw.append(h)
        cen.append(np.array([c.centered_height(x, n) for x in h]))
    return SummaryStats.from_samples("height", cfg.n_grid, cen, raw)


@dataclass
class DiameterReport:
    height: SummaryStats
    diameter: SummaryStats
    double_height: SummaryStats
    violations: int
    total: int

    def rows(self, experiment: str) -> list[tuple]:
        rows = self.height.rows(experiment) + self.diameter.rows(experiment) \
            + self.double_height.rows(experiment)
        rows.append((experiment, int(self.height.n[-1]), self.total,
                     "diameter_exceeds_twice_height", self.violations, "", ""))
        return rows


def diameter_vs_height(cfg: ExperimentConfig) -> DiameterReport:
    """Height and diameter from the same trees, with the check ``diam <= 2 h``."""
    _check_grid(cfg)
    c = cfg.constants()
    hc, hr, dc, dr, hhc, hhr = [], [], [], [], [], []
    bad = 0
    total = 0
    for n in cfg.n_grid:
        h, d = grow_replicas(cfg, n, True)
        bad += int(np.sum(d > 2 * h))
        total += len(h)
        ln, lln = math.log(n), math.log(math.log(n))
        hr.append(h)
        hc.append(h - c.speed * ln + c.logcorr * lln)
        dr.append(d)
        dc.append(d - c.diameter_speed * ln + c.diameter_logcorr * lln)
        hhr.append(2 * h)
        hhc.append(2 * h - c.diameter_speed * ln + c.diameter_logcorr * lln)
    return DiameterReport(
        SummaryStats.from_samples("height", cfg.n_grid, hc, hr),
        SummaryStats.from_samples("diameter", cfg.n_grid, dc, dr),
        SummaryStats.from_samples("twice_height", cfg.n_grid, hhc, hhr),
        bad, total)


@dataclass
class TailTable:
    n: int
    x: np.ndarray
    probability: np.ndarray
    counts: np.ndarray
    replicas: int
    slope: float
    intercept: float

    def rows(self, experiment: str) -> list[tuple]:
        out = []
        for x, p, c in zip(self.x, self.probability, self.counts):
            lo, hi = stats.binomtest(int(c), self.replicas).proportion_ci(0.95, method="exact")
            out.append((experiment, self.n, self.replicas, f"tail_x{int(x)}", float(p), lo, hi))
        out.append((experiment, self.n, self.replicas, "tail_slope", self.slope, "", ""))
        return out


def tail_from_heights(h: np.ndarray, n: int, constants: AsymptoticConstants, x_grid) -> TailTable:
    """``P(h >= speed log n - logcorr log log n + x)`` and a log-linear fit over the nonzero entries."""
    cen = constants.centered_height(h.astype(float), n)
    xs = np.asarray(x_grid, dtype=float)
    counts = np.array([int(np.sum(cen >= x)) for x in xs])
    p = counts / len(h)
    ok = p > 0
    if ok.sum() >= 2:
        slope, intercept = np.polyfit(xs[ok], np.log(p[ok]), 1)
    else:
        slope, intercept = math.nan, math.nan
    return TailTable(n, xs, p, counts, len(h), float(slope), float(intercept))


def tail_bound(cfg: ExperimentConfig, x_grid=None) -> list[TailTable]:
    """Empirical upper tail of the centered height, one table per n."""
    _check_grid(cfg)
    c = cfg.constants()
    xg = tuple(x_grid if x_grid is not None else cfg.x_grid)
    return [tail_from_heights(grow_replicas(cfg, n, False)[0], n, c, xg) for n in cfg.n_grid]


# -- Q_n^(N) ----------------------------------------------------------------------------


@dataclass
class QnSetup:
    """Tilt and time change of the collapsed sequence ``w^(N)`` up to ``n = i_t``."""

    seq: WeightSequence
    seqN: WeightSequence
    theta: float
    N: int
    K: int
    t: int
    n: int
    x_n: int
    params: TiltParams
    checkpoints: np.ndarray  # i_k for k = 0..t
    kappa: np.ndarray        # kappa[m] = min{k : i_k >= m}

    @property
    def log_z(self) -> float:
        return float(self.params.log_z[self.n])


def qn_setup(seq: WeightSequence, N: int, K: int, t: int, theta: float) -> QnSetup:
    if t < 1 or K < 0 or N < 1:
        raise ValueError("need t >= 1, K >= 0 and N >= 1")
    seqN = modified_sequence(seq, N)
    size = max(4 * N, 64)
    while True:
        tp = tilt_params(seqN, theta, size)
        if tp.p[2:].sum() >= t:
            break
        size *= 2
    tc = time_change(tp.p, t)
    n = int(tc.i[t])
    if n < 3:
        raise ValueError("t is too small: i_t must be at least 3 for x_n to be defined")
    xn = x_n(theta, n)
    if t - xn < 0:
        raise ValueError(f"t={t} is below x_n={xn}")
    tp = tilt_params(seqN, theta, n)
    kappa = np.searchsorted(tc.i, np.arange(n + 1), side="left").astype(np.int64)
    return QnSetup(seq, seqN, theta, N, K, t, n, xn, tp, tc.i, kappa)


@dataclass
class QnResult:
    value: float
    log_value: float
    count: int
    labels: np.ndarray
    height_full: int
    height_collapsed: int


def qn_statistic(setup: QnSetup, rng=None) -> QnResult:
    """One realization of Q_n^(N) on a collapsed WRT, with both tree heights.

    ``Q = sum_m (w^(N)_m / W_n) e^{theta h_m} 1{...}``; all qualifying vertices
    share the height ``t - x_n``, so the log is ``theta (t - x_n) + log sum w - log W_n``.
    """
    rng = np.random.default_rng(rng)
    tree = grow_wrt(setup.seq, setup.n, rng)
    tN = collapse(tree, setup.N)
    t, xn = setup.t, setup.x_n
    early, late = Kn.checkpoint_maxima(tN.parent, tN.height, setup.kappa, t // 2, (t + 1) // 2)
    wN = setup.seqN.weights(setup.n)
    ok = (tN.height == t - xn) & (early <= setup.K) & (late <= -xn) & (wN > 0)
    ok[0] = False
    labels = np.nonzero(ok)[0]
    Wn = setup.seqN.prefix(setup.n)[setup.n]
    s = float(wN[labels].sum())
    log_q = setup.theta * (t - xn) + math.log(s) - math.log(Wn) if s > 0 else -math.inf
    return QnResult(math.exp(log_q) if s > 0 else 0.0, log_q, len(labels), labels,
                    int(tree.height.max()), int(tN.height.max()))


def qn_brute_force(setup: QnSetup, tree_collapsed) -> np.ndarray:
    """Qualifying labels by walking every ancestor line; slow reference for tests."""
    t, xn, K = setup.t, setup.x_n, setup.K
    wN = setup.seqN.weights(setup.n)
    out = []
    for m in range(1, setup.n + 1):
        if wN[m] == 0 or tree_collapsed.height[m] != t - xn:
            continue
        traj = tree_collapsed.trajectory(m)
        vals = [traj[setup.checkpoints[k] - 1] - k for k in range(t + 1)]
        if max(vals[: t // 2 + 1]) <= K and max(vals[(t + 1) // 2:]) <= -xn:
            out.append(m)
    return np.array(out, dtype=np.int64)


@dataclass
class QnMoment:
    probability: float      # P(S_t = -x_n, barriers)
    log_z: float
    mean: float             # E[Q] = Z P
    scaled: float           # E[Q] t^{3/2} / Z
    asymptotic: float       # sqrt(2/pi) K / rho^-

    @property
    def ratio(self) -> float:
        return self.scaled / self.asymptotic


def qn_first_moment(setup: QnSetup) -> QnMoment:
    """Exact ``E[Q]`` through the one-spine identity and a barrier DP on ``S^{(p^(N), i^(N))}``."""
    spec = spec_from_params(setup.params.p, setup.t)
    prob = barrier_probability_exact(spec, setup.K, -setup.x_n, 0, 0.5, setup.t, cap=None)
    rho_minus = load_renewal_table("descending").rho
    asym = math.sqrt(2.0 / math.pi) * setup.K / rho_minus
    return QnMoment(prob, setup.log_z, math.exp(setup.log_z) * prob, prob * setup.t ** 1.5, asym)


@dataclass
class QnCampaign:
    setup: QnSetup
    mean_over_z: float
    ci_half: float
    replicas: int
    dominated: int  # replicas with h(T_n) >= h(T_n^(N))
    moment: QnMoment

    def rows(self, experiment: str) -> list[tuple]:
        n, R = self.setup.n, self.replicas
        m, h = self.mean_over_z, self.ci_half
        return [
            (experiment, n, R, "Q_over_Z_mean", m, m - h, m + h),
            (experiment, n, R, "Q_over_Z_exact", self.moment.probability, "", ""),
            (experiment, n, R, "scaled_first_moment", self.moment.scaled, "", ""),
            (experiment, n, R, "asymptotic_first_moment", self.moment.asymptotic, "", ""),
            (experiment, n, R, "height_domination_count", self.dominated, "", ""),
        ]


def qn_campaign(cfg: ExperimentConfig) -> QnCampaign:
    c = cfg.constants()
    setup = qn_setup(cfg.weight_sequence(), cfg.N, cfg.K, cfg.t, c.theta)
    z = math.exp(setup.log_z)
    vals = np.empty(cfg.replicas)
    dom = 0
    for r in range(cfg.replicas):
        res = qn_statistic(setup, replica_rng(cfg.seed, setup.n, r))
        vals[r] = res.value / z
        dom += res.height_full >= res.height_collapsed
    half = Z95 * vals.std(ddof=1) / math.sqrt(cfg.replicas) if cfg.replicas > 1 else math.inf
    return QnCampaign(setup, float(vals.mean()), float(half), cfg.replicas, dom, qn_first_moment(setup))


# -- PAT versus WRT with random weights --------------------------------------------------


@dataclass
class EquivalenceReport:
    n: int
    replicas: int
    ks_statistic: float
    ks_pvalue: float
    chi2_statistic: float
    chi2_pvalue: float
    pat_heights: np.ndarray = field(repr=False)
    wrt_heights: np.ndarray = field(repr=False)

    def rows(self, experiment: str) -> list[tuple]:
        return [
            (experiment, self.n, self.replicas, "ks_pvalue", self.ks_pvalue, "", ""),
            (experiment, self.n, self.replicas, "root_degree_chi2_pvalue", self.chi2_pvalue, "", ""),
            (experiment, self.n, self.replicas, "pat_height_mean", float(self.pat_heights.mean()), "", ""),
            (experiment, self.n, self.replicas, "wrt_height_mean", float(self.wrt_heights.mean()), "", ""),
        ]


def _pooled_contingency(x: np.ndarray, y: np.ndarray, min_expected: float = 5.0):
    """2 x bins table of counts, merging sparse upper bins."""
    top = int(max(x.max(), y.max()))
    cx = np.bincount(x, minlength=top + 1).astype(float)
    cy = np.bincount(y, minlength=top + 1).astype(float)
    cols = []
    acc = np.zeros(2)
    for k in range(top + 1):
        acc += (cx[k], cy[k])
        if acc.sum() >= 2 * min_expected:
            cols.append(acc)
            acc = np.zeros(2)
    if acc.sum() > 0:
        if cols:
            cols[-1] = cols[-1] + acc
        else:
            cols.append(acc)
    return np.array(cols).T


def pat_wrt_equivalence(fit: FitnessSequence, n: int, replicas: int, seed: int = 0,
                        batch: int = 1000) -> EquivalenceReport:
    """PAT grown directly versus WRT grown on fresh random weights, replica by replica."""
    a = np.ascontiguousarray(fit.values(max(n, 2)))
    ph = np.empty(replicas, np.int64)
    wh = np.empty(replicas, np.int64)
    pd = np.empty(replicas, np.int64)
    wd = np.empty(replicas, np.int64)
    for r in range(replicas):
        rng = replica_rng(seed, n, r)
        parent = Kn.pat_parents(rng, a, n)
        h, deg = Kn.heights_outdeg(parent)
        ph[r], pd[r] = h.max(), deg[1]
    for lo in range(0, replicas, batch):
        hi = min(replicas, lo + batch)
        wmat = pat_weight_matrix(fit, n, hi - lo, replica_rng(seed, n, lo, stream=1))
        Wmat = np.cumsum(wmat, axis=1)
        for r in range(lo, hi):
            rng = replica_rng(seed, n, r, stream=2)
            parent = Kn.wrt_parents(rng, np.ascontiguousarray(Wmat[r - lo]), n)
            h, deg = Kn.heights_outdeg(parent)
            wh[r], wd[r] = h.max(), deg[1]
    ks = stats.ks_2samp(ph, wh)
    if n >= 2 and (pd.max() > pd.min() or wd.max() > wd.min()):
        table = _pooled_contingency(pd, wd)
        if table.shape[1] > 1:
            chi = stats.chi2_contingency(table, correction=False)
            c_stat, c_p = float(chi.statistic), float(chi.pvalue)
        else:
            c_stat, c_p = 0.0, 1.0
    else:
        c_stat, c_p = 0.0, 1.0
    ks_p = float(ks.pvalue) if not math.isnan(ks.pvalue) else 1.0
    return EquivalenceReport(n, replicas, float(ks.statistic), ks_p, c_stat, c_p, ph, wh)


@dataclass
class ShapeReport:
    shapes: list[tuple[int, ...]]
    pat_exact: np.ndarray
    wrt_mean: np.ndarray
    wrt_se: np.ndarray

    @property
    def z_scores(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.wrt_mean - self.pat_exact) / self.wrt_se
        return np.where(self.wrt_se > 0, z, np.where(self.wrt_mean == self.pat_exact, 0.0, np.inf))

    def agrees(self, z_max: float = 3.0) -> bool:
        return bool(np.all(self.z_scores <= z_max))


def pat_shape_check(fit: FitnessSequence, n: int, draws: int, rng=None) -> ShapeReport:
    """Exact PAT shape law versus WRT shape probabilities averaged over random weights."""
    w = pat_weight_matrix(fit, n, draws, rng)
    W = np.cumsum(w, axis=1)
    shapes = list(iter_parent_arrays(n))
    exact = np.array([pat_tree_probability(fit, s) for s in shapes])
    mean = np.empty(len(shapes))
    se = np.empty(len(shapes))
    for idx, s in enumerate(shapes):
        prob = np.ones(draws)
        for m, p in enumerate(s, start=2):
            prob *= w[:, p] / W[:, m - 1]
        mean[idx] = prob.mean()
        se[idx] = prob.std(ddof=1) / math.sqrt(draws) if draws > 1 else math.inf
    return ShapeReport(shapes, exact, mean, se)


# -- output --------------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def results_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_results(rows, out=None) -> str:
    """Write rows as CSV to ``out`` (a path) or standard output; returns the text."""
    text = results_csv(rows)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    return text


EXPERIMENTS = ("height", "diameter", "tail", "qn", "pat-wrt")


def run_experiment(cfg: ExperimentConfig) -> list[tuple]:
    """Run the campaign named by ``cfg.experiment`` and return its CSV rows."""
    name = cfg.experiment
    if name == "height":
        return height_expansion(cfg).rows(name)
    if name == "diameter":
        return diameter_vs_height(cfg).rows(name)
    if name == "tail":
        return [row for tab in tail_bound(cfg) for row in tab.rows(name)]
    if name == "qn":
        return qn_campaign(cfg).rows(name)
    if name == "pat-wrt":
        fit = FitnessSequence.constant(cfg.fitness)
        return [row for n in cfg.n_grid
                for row in pat_wrt_equivalence(fit, n, cfg.replicas, cfg.seed).rows(name)]
    raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
