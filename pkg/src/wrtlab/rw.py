"""Blocked inhomogeneous Bernoulli walks and their homogeneous comparison walk.

A :class:`WalkSpec` holds jump probabilities ``r_j`` (j >= 2) and block
boundaries ``j_0 = 1 < j_1 < ...``.  Block k sums the Bernoulli(r_j) for
``j_{k-1} < j <= j_k`` into ``Y_k`` and the walk is ``S_k = sum Y - k``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

from . import _kernels as Kn

PMF_TAIL = 1e-15
DP_CAP = 1_000_000
BARRIER_CHUNK = 1 << 20


# -- walk specifications --------------------------------------------------------


@dataclass(frozen=True)
class WalkSpec:
    r: np.ndarray  # indexed by j; entries 0 and 1 unused
    j: np.ndarray  # j[0] = 1, strictly increasing

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        j = np.asarray(self.j, dtype=np.int64)
        if j.ndim != 1 or j.shape[0] < 1 or j[0] != 1:
            raise ValueError("block boundaries must start at j_0 = 1")
        if np.any(np.diff(j) <= 0):
            raise ValueError("block boundaries must be strictly increasing")
        if r.shape[0] < j[-1] + 1:
            raise ValueError("r is shorter than the last block boundary")
        if np.any(r[2:] < 0) or np.any(r[2:] > 1):
            raise ValueError("jump probabilities must lie in [0, 1]")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "j", j)

    @classmethod
    def from_blocks(cls, blocks) -> "WalkSpec":
        """Build from a list of per-block probability lists."""
        sizes = [len(b) for b in blocks]
        if any(s == 0 for s in sizes):
            raise ValueError("blocks must be non-empty")
        j = np.concatenate(([1], 1 + np.cumsum(sizes)))
        r = np.concatenate(([0.0, 0.0], *[np.asarray(b, float) for b in blocks]))
        return cls(r, j)

    @property
    def n_blocks(self) -> int:
        return self.j.shape[0] - 1

    def block(self, k: int) -> np.ndarray:
        """Probabilities of block k (1-based)."""
        if not 1 <= k <= self.n_blocks:
            raise IndexError(f"block {k} outside 1..{self.n_blocks}")
        return self.r[self.j[k - 1] + 1: self.j[k] + 1]

    def block_means(self) -> np.ndarray:
        """``E[Y_k]`` for k = 1..n_blocks (entry k-1)."""
        c = np.concatenate(([0.0], np.cumsum(self.r[2:])))
        return c[self.j[1:] - 1] - c[self.j[:-1] - 1]

    def mean_path(self) -> np.ndarray:
        """``E[S_k]`` for k = 0..n_blocks."""
        return np.concatenate(([0.0], np.cumsum(self.block_means() - 1.0)))

    def shifted(self, s: int) -> "WalkSpec":
        """Spec of ``(S_{k+s} - S_s)_k``: ``r'_i = r_{j_s + i - 1}``, ``j'_k = j_{s+k} - j_s + 1``."""
        if not 0 <= s <= self.n_blocks:
            raise ValueError("shift outside the block range")
        js = int(self.j[s])
        r = np.concatenate(([0.0, 0.0], self.r[js + 1:]))
        return WalkSpec(r, self.j[s:] - js + 1)

    def truncated(self, n_blocks: int) -> "WalkSpec":
        if n_blocks > self.n_blocks:
            raise ValueError("cannot extend a spec by truncation")
        j = self.j[: n_blocks + 1]
        return WalkSpec(self.r[: j[-1] + 1], j)

    def simulate(self, rng=None, replicas: int = 1) -> np.ndarray:
        """Paths ``S_0..S_n`` from uniforms ``U_j <= r_j``; one row per replica."""
        rng = np.random.default_rng(rng)
        last = int(self.j[-1])
        jumps = rng.random((replicas, last - 1)) <= self.r[2:last + 1]
        c = np.concatenate((np.zeros((replicas, 1), np.int64), np.cumsum(jumps, axis=1)), axis=1)
        sums = c[:, self.j - 1]
        return sums - np.arange(self.n_blocks + 1)


def poisson_limit_spec(n_blocks: int, block_size: int = 1000) -> WalkSpec:
    """Blocks of ``block_size`` Bernoulli(1/block_size): increments close to Poisson(1) - 1."""
    r = np.full(n_blocks * block_size + 2, 1.0 / block_size)
    r[:2] = 0.0
    return WalkSpec(r, 1 + block_size * np.arange(n_blocks + 1))


def random_walk_spec(n_blocks: int, rng=None, min_size: int = 2, max_size: int = 40) -> WalkSpec:
    """Random blocks of Bernoulli parameters, each block summing to roughly one."""
    rng = np.random.default_rng(rng)
    sizes = rng.integers(min_size, max_size + 1, n_blocks)
    blocks = []
    for size in sizes:
        mass = rng.uniform(0.8, 1.2)
        blocks.append(np.minimum(rng.dirichlet(np.ones(size)) * mass, 1.0))
    return WalkSpec.from_blocks(blocks)


# -- time change ----------------------------------------------------------------


@dataclass(frozen=True)
class TimeChange:
    i: np.ndarray  # i[k] for k = 0..t_max

    @property
    def t_max(self) -> int:
        return self.i.shape[0] - 1

    def tau(self, n: int) -> int:
        """Smallest t with ``i_t >= n``."""
        t = int(np.searchsorted(self.i, n, side="left"))
        if t > self.t_max:
            raise ValueError(f"i_t stays below {n} up to t_max={self.t_max}")
        return t


def time_change(p, t_max: int) -> TimeChange:
    """``i_k = inf{i >= 1 : sum_{j=2}^i p_j >= k}`` for k = 0..t_max, with ``i_0 = 1``.

    ``p`` is indexed by label (entries 0 and 1 are ignored).
    """
    p = np.asarray(p, dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(p[2:])))  # cum[i-1] = sum_{j=2}^i p_j
    if t_max > 0 and cum[-1] < t_max:
        raise ValueError(f"sum of p reaches only {cum[-1]:.3f} < t_max={t_max}")
    i = np.searchsorted(cum, np.arange(t_max + 1), side="left") + 1
    i[0] = 1
    return TimeChange(i.astype(np.int64))


def spec_from_params(p, t_max: int) -> WalkSpec:
    """The walk ``S^{(p, i)}`` obtained by blocking the spine jumps at the time change."""
    tc = time_change(p, t_max)
    p = np.asarray(p, dtype=float)
    return WalkSpec(p[: tc.i[-1] + 1], tc.i)


# -- error terms ----------------------------------------------------------------


def _iroot4(k: int) -> int:
    m = int(round(k ** 0.25))
    while m ** 4 > k:
        m -= 1
    while (m + 1) ** 4 <= k:
        m += 1
    return m


@dataclass
class ErrorTerms:
    """Entries indexed by k = 0..k_max; ``delta[0]`` is 0 by convention."""

    delta: np.ndarray
    Delta: np.ndarray
    eta: np.ndarray


def error_terms(spec: WalkSpec, k_max: int) -> ErrorTerms:
    if k_max > spec.n_blocks:
        raise ValueError(f"k_max={k_max} exceeds the {spec.n_blocks} available blocks")
    delta = np.zeros(k_max + 1)
    delta[1:] = np.abs(spec.block_means()[:k_max] - 1.0)
    Delta = np.maximum.accumulate(np.abs(spec.mean_path()[: k_max + 1]))
    r2 = np.concatenate(([0.0], np.cumsum(spec.r[2:] ** 2)))  # r2[i-1] = sum_{j<=i} r_j^2
    dcum = np.cumsum(delta)
    eta = np.zeros(k_max + 1)
    for k in range(k_max + 1):
        m = _iroot4(k)
        sq = r2[spec.j[k] - 1] - r2[spec.j[m] - 1]
        ds = dcum[k] - (dcum[m - 1] if m >= 1 else 0.0)
        eta[k] = 2.0 * sq + 2.0 * ds
    return ErrorTerms(delta, Delta, eta)


def coupling_bound(spec: WalkSpec, m: int, n: int) -> float:
    """``2 sum_{j=j_m+1}^{j_n} r_j^2 + 2 sum_{k=m}^n delta_k``."""
    et = error_terms(spec, n)
    sq = float(np.sum(spec.r[spec.j[m] + 1: spec.j[n] + 1] ** 2))
    return 2.0 * sq + 2.0 * float(np.sum(et.delta[m: n + 1]))


# -- pmfs and the Poisson coupling ----------------------------------------------


def poisson_binomial_pmf(probs, cap: int | None = DP_CAP) -> np.ndarray:
    """Exact pmf of a sum of independent Bernoulli(probs) by dynamic programming.

    Upper-tail entries with total mass below ``PMF_TAIL`` are dropped as the
    recursion proceeds and the result is renormalized.  ``cap`` bounds the
    number of pmf terms updated; ``None`` lifts the bound.
    """
    probs = np.ascontiguousarray(probs, dtype=float)
    limit = np.iinfo(np.int64).max if cap is None else int(cap)
    pmf, terms = Kn.poisson_binomial(probs, PMF_TAIL, limit)
    if pmf.shape[0] == 0:
        raise ValueError(f"pmf recursion exceeds the cap of {cap} terms")
    return pmf / pmf.sum()


def poisson_pmf(mu: float = 1.0) -> np.ndarray:
    """Poisson(mu) pmf truncated once the remaining mass falls below ``PMF_TAIL``."""
    kmax = int(stats.poisson.isf(PMF_TAIL, mu)) + 1
    pmf = stats.poisson.pmf(np.arange(kmax + 1), mu)
    return pmf / pmf.sum()


def _cdf_table(pmfs) -> np.ndarray:
    width = max(len(p) for p in pmfs)
    out = np.ones((len(pmfs), width))
    for row, p in zip(out, pmfs):
        c = np.cumsum(p)
        row[: len(c)] = c
        row[len(c) - 1:] = 1.0
    return out


@dataclass
class _MaxCoupling:
    """Maximal coupling of two pmfs on a common support."""

    p: np.ndarray
    q: np.ndarray
    tv: float = field(init=False)

    def __post_init__(self):
        size = max(len(self.p), len(self.q))
        self.p = np.pad(self.p, (0, size - len(self.p)))
        self.q = np.pad(self.q, (0, size - len(self.q)))
        common = np.minimum(self.p, self.q)
        self.tv = max(0.0, 1.0 - float(common.sum()))
        self._common = np.cumsum(common) / max(common.sum(), 1e-300)
        self._pex = np.cumsum(np.clip(self.p - common, 0, None))
        self._qex = np.cumsum(np.clip(self.q - common, 0, None))

    def draw(self, rng, size: int):
        u = rng.random(size)
        v = rng.random(size)
        w = rng.random(size)
        same = u >= self.tv
        x = np.empty(size, np.int64)
        y = np.empty(size, np.int64)
        last = len(self._common) - 1
        c = np.minimum(np.searchsorted(self._common, v[same], side="right"), last)
        x[same] = c
        y[same] = c
        diff = ~same
        if diff.any():
            x[diff] = np.minimum(np.searchsorted(self._pex, v[diff] * self._pex[-1], side="right"), last)
            y[diff] = np.minimum(np.searchsorted(self._qex, w[diff] * self._qex[-1], side="right"), last)
        return x, y


@dataclass
class CouplingSample:
    """Paths indexed by k = 0..n-m, one row per replica."""

    s: np.ndarray
    s_hat: np.ndarray
    first_disagreement: np.ndarray  # -1 where the paths agree throughout

    @property
    def disagreement_rate(self) -> float:
        return float(np.mean(self.first_disagreement >= 0))


def _couplings(spec: WalkSpec, m: int, n: int, cap: int):
    if not 0 <= m <= n <= spec.n_blocks:
        raise ValueError(f"need 0 <= m <= n <= {spec.n_blocks}")
    pois = poisson_pmf(1.0)
    return [_MaxCoupling(poisson_binomial_pmf(spec.block(k), cap), pois) for k in range(m + 1, n + 1)]


def couple_poisson_batch(spec: WalkSpec, m: int, n: int, replicas: int, rng=None,
                         cap: int = DP_CAP) -> CouplingSample:
    """Couple ``S_{m+k} - S_m`` with a Poisson(1)-1 walk, block by block, maximally."""
    rng = np.random.default_rng(rng)
    cps = _couplings(spec, m, n, cap)
    ys = np.zeros((replicas, n - m + 1), np.int64)
    zs = np.zeros((replicas, n - m + 1), np.int64)
    for k, cp in enumerate(cps, start=1):
        ys[:, k], zs[:, k] = cp.draw(rng, replicas)
    steps = np.arange(n - m + 1)
    s = np.cumsum(ys, axis=1) - steps
    s_hat = np.cumsum(zs, axis=1) - steps
    differ = s != s_hat
    first = np.where(differ.any(axis=1), differ.argmax(axis=1), -1)
    return CouplingSample(s, s_hat, first)


def couple_poisson(spec: WalkSpec, m: int, n: int, rng=None, cap: int = DP_CAP):
    """One coupled pair: ``(S path, S-hat path, first disagreement index or None)``."""
    out = couple_poisson_batch(spec, m, n, 1, rng, cap)
    fd = int(out.first_disagreement[0])
    return out.s[0], out.s_hat[0], (None if fd < 0 else fd)


def coupling_disagreement_exact(spec: WalkSpec, m: int, n: int, cap: int = DP_CAP) -> float:
    """Probability that the blockwise maximal coupling disagrees somewhere."""
    return 1.0 - float(np.prod([1.0 - cp.tv for cp in _couplings(spec, m, n, cap)]))


def coupling_increments_pmf(spec: WalkSpec, k: int, cap: int = DP_CAP):
    """Exact pmfs of ``Y_k`` and of the Poisson(1) comparison variable."""
    return poisson_binomial_pmf(spec.block(k), cap), poisson_pmf(1.0)


# -- renewal functions ------------------------------------------------------------

ASCENDING = "ascending"
DESCENDING = "descending"
RENEWAL_VERSION = 1


@dataclass
class RenewalTable:
    direction: str
    values: np.ndarray
    stderr: np.ndarray
    rho: float
    rho_stderr: float
    sample_count: int

    def __call__(self, x: int) -> float:
        if x < 0:
            return 0.0
        if x >= len(self.values):
            raise ValueError(f"renewal table only reaches x={len(self.values) - 1}")
        return float(self.values[x])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"# direction={self.direction},rho={self.rho!r},rho_stderr={self.rho_stderr!r},"
                  f"sample_count={self.sample_count},version={RENEWAL_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "R", "stderr"])
        for x, (v, s) in enumerate(zip(self.values, self.stderr)):
            w.writerow([x, repr(float(v)), repr(float(s))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "RenewalTable":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ValueError("missing renewal header line")
        meta = dict(kv.split("=", 1) for kv in lines[0][1:].strip().split(","))
        if int(meta.get("version", "0")) != RENEWAL_VERSION:
            raise ValueError(f"unsupported renewal table version {meta.get('version')}")
        rows = list(csv.DictReader(lines[1:]))
        values = np.array([float(r["R"]) for r in rows])
        se = np.array([float(r["stderr"]) for r in rows])
        return cls(meta["direction"], values, se, float(meta["rho"]),
                   float(meta["rho_stderr"]), int(meta["sample_count"]))


def _fit_slope(values) -> float:
    """Least-squares slope of R over the top half of the x range."""
    x_max = len(values) - 1
    xs = np.arange(x_max // 2, x_max + 1)
    return float(np.polyfit(xs, values[xs], 1)[0])


def renewal_exact(direction: str, x_max: int) -> RenewalTable:
    """Renewal function from the exact ladder-height law.

    For the Poisson(1)-1 walk (no downward skips, zero mean) the first strict
    ascending ladder height satisfies ``P(H = h) = P(X >= h) / E[X^+]``, i.e.
    ``e * P(Poisson(1) >= h + 1)``.  For the 1-Poisson(1) walk every ladder
    height equals 1.  ``rho = 1 / E[H]``.
    """
    if direction == ASCENDING:
        h = np.arange(1, x_max + 1)
        f = np.concatenate(([0.0], math.e * stats.poisson.sf(h, 1.0)))
        u = np.zeros(x_max + 1)
        u[0] = 1.0
        for y in range(1, x_max + 1):
            u[y] = float(np.dot(f[1: y + 1], u[y - 1:: -1][:y]))
        values = np.cumsum(u)
        rho = 2.0 / math.e
    elif direction == DESCENDING:
        values = np.arange(1, x_max + 2, dtype=float)
        rho = 1.0
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return RenewalTable(direction, values, np.zeros(x_max + 1), rho, 0.0, 0)


def renewal_estimate(direction: str, x_max: int, samples: int, rng=None,
                     step_cap: int = 100_000, batches: int = 20) -> RenewalTable:
    """Monte Carlo renewal function with per-level standard errors.

    Ascending: expected visits of the killed walk (time reversal).
    Descending: direct simulation of ladder epochs.  Samples run in
    ``batches`` independent streams; the error of ``rho`` is the batch-means
    standard error.  ``sample_count`` is the number of ladder heights observed
    up to ``x_max``.
    """
    if x_max < 1:
        raise ValueError("x_max must be at least 1")
    if samples < 2 * batches:
        raise ValueError("need at least two samples per batch")
    if direction not in (ASCENDING, DESCENDING):
        raise ValueError(f"unknown direction {direction!r}")
    ss = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    cdf = _cdf_table([poisson_pmf(1.0)])[0]
    sizes = [samples // batches + (b < samples % batches) for b in range(batches)]
    s1 = np.zeros(x_max + 1)
    s2 = np.zeros(x_max + 1)
    slopes = []
    for size, seed in zip(sizes, ss.spawn(batches)):
        g = np.random.default_rng(seed)
        if direction == ASCENDING:
            b1, b2 = Kn.renewal_ascending(g, cdf, x_max, size)
        else:
            b1, b2, _, _ = Kn.renewal_descending(g, cdf, x_max, size, step_cap)
        s1 += b1
        s2 += b2
        slopes.append(_fit_slope(b1 / size))
    mean = s1 / samples
    var = np.maximum(s2 / samples - mean ** 2, 0.0) * samples / (samples - 1)
    se = np.sqrt(var / samples)
    rho_se = float(np.std(slopes, ddof=1) / math.sqrt(batches))
    return RenewalTable(direction, mean, se, _fit_slope(mean), rho_se, int(round(s1[-1])))


def load_renewal_table(direction: str) -> RenewalTable:
    """Cached simulated renewal table shipped with the package."""
    name = f"renewal_{direction}_v{RENEWAL_VERSION}.csv"
    text = resources.files("wrtlab").joinpath("data", name).read_text()
    return RenewalTable.from_csv(text)


# -- barrier events -----------------------------------------------------------------


@dataclass
class BarrierEstimate:
    probability: float
    ci_low: float
    ci_high: float
    hits: int
    replicas: int


def _block_cdfs(spec: WalkSpec, n: int, cap: int | None) -> np.ndarray:
    if n > spec.n_blocks:
        raise ValueError(f"spec has only {spec.n_blocks} blocks, need {n}")
    cache: dict[bytes, np.ndarray] = {}
    pmfs = []
    for k in range(1, n + 1):
        b = spec.block(k)
        key = b.tobytes()
        if key not in cache:
            cache[key] = poisson_binomial_pmf(b, cap)
        pmfs.append(cache[key])
    return _cdf_table(pmfs)


def _split(lam: float, n: int) -> int:
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    return math.ceil(lam * n - 1e-12)  # first k with k >= lambda n


def barrier_probability(spec: WalkSpec, K: int, L: int, a: int, lam: float, n: int,
                        replicas: int, rng=None, threads: int = 1,
                        cap: int = DP_CAP, confidence: float = 0.95) -> BarrierEstimate:
    """Monte Carlo ``P(S_n = L - a, max_{k < lam n} S_k <= K, max_{lam n <= k <= n} S_k <= L)``.

    Replicas run in fixed chunks with their own spawned streams, so the
    result does not depend on ``threads``.  The interval is Clopper-Pearson.
    """
    if K < 0 or a < 0:
        raise ValueError("K and a must be non-negative")
    cdfs = _block_cdfs(spec, n, cap)
    split = _split(lam, n)
    ss = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    chunks = [BARRIER_CHUNK] * (replicas // BARRIER_CHUNK)
    if replicas % BARRIER_CHUNK:
        chunks.append(replicas % BARRIER_CHUNK)
    seeds = ss.spawn(len(chunks))

    def run(args):
        size, seed = args
        return Kn.barrier_hits(np.random.default_rng(seed), cdfs, K, L, L - a, split, size)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            hits = sum(ex.map(run, zip(chunks, seeds)))
    else:
        hits = sum(map(run, zip(chunks, seeds)))
    ci = stats.binomtest(int(hits), replicas).proportion_ci(confidence, method="exact")
    return BarrierEstimate(hits / replicas, float(ci.low), float(ci.high), int(hits), replicas)


def barrier_probability_exact(spec: WalkSpec, K: int, L: int, a: int, lam: float,
                              n: int, cap: int | None = DP_CAP) -> float:
    """The same barrier probability by forward dynamic programming over S_k."""
    pmfs = [np.diff(np.concatenate(([0.0], row))) for row in _block_cdfs(spec, n, cap)]
    split = _split(lam, n)
    top = max(K, L)
    off = n  # S_k >= -k
    dist = np.zeros(off + top + 1)
    dist[off] = 1.0
    if split <= 0 and 0 > L:
        return 0.0
    for k in range(1, n + 1):
        new = np.zeros_like(dist)
        for y, py in enumerate(pmfs[k - 1]):
            if py == 0.0:
                continue
            d = y - 1
            if d >= 0:
                new[d:] += py * dist[: len(dist) - d]
            else:
                new[:d] += py * dist[-d:]
        bound = K if k < split else L
        new[off + bound + 1:] = 0.0
        dist = new
    idx = off + L - a
    return float(dist[idx]) if 0 <= idx < len(dist) else 0.0


def barrier_prediction(K: int, a: int, n: int, R: RenewalTable | None = None,
                       R_minus: RenewalTable | None = None) -> float:
    """``sqrt(2/pi) R(K) R^-(a) / (n^{3/2} rho rho^-)``, from cached tables by default."""
    R = R or load_renewal_table(ASCENDING)
    R_minus = R_minus or load_renewal_table(DESCENDING)
    return math.sqrt(2.0 / math.pi) * R(K) * R_minus(a) / (n ** 1.5 * R.rho * R_minus.rho)


def barrier_upper_shape(K: int, a: int, n: int) -> float:
    """``(K+1)(a+1)/(n^{3/2}+1)``; the barrier probability over this is the empirical constant."""
    return (K + 1) * (a + 1) / (n ** 1.5 + 1.0)
