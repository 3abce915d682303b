"""Compiled inner loops.  All arrays are 1-based by label; index 0 is padding."""

import numpy as np
from numba import njit


@njit(cache=True)
def heights_outdeg(parent):
    n = parent.shape[0] - 1
    height = np.zeros(n + 1, np.int64)
    outdeg = np.zeros(n + 1, np.int64)
    for v in range(2, n + 1):
        p = parent[v]
        height[v] = height[p] + 1
        outdeg[p] += 1
    return height, outdeg


@njit(cache=True)
def diameter_from_parents(parent):
    """Longest path length via the two deepest child subtrees of every vertex."""
    n = parent.shape[0] - 1
    top1 = np.zeros(n + 1, np.int64)
    top2 = np.zeros(n + 1, np.int64)
    best = 0
    for v in range(n, 1, -1):
        if top1[v] + top2[v] > best:
            best = top1[v] + top2[v]
        p = parent[v]
        d = top1[v] + 1
        if d > top1[p]:
            top2[p] = top1[p]
            top1[p] = d
        elif d > top2[p]:
            top2[p] = d
    if n >= 1 and top1[1] + top2[1] > best:
        best = top1[1] + top2[1]
    return best


@njit(cache=True)
def _search(W, m, target):
    # smallest label k in 1..m with W[k] > target
    lo, hi = 1, m
    while lo < hi:
        mid = (lo + hi) >> 1
        if W[mid] > target:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def wrt_parents(rng, W, n):
    parent = np.zeros(n + 1, np.int64)
    for m in range(1, n):
        parent[m + 1] = _search(W, m, rng.random() * W[m])
    return parent


@njit(cache=True)
def urt_parents(rng, n):
    parent = np.zeros(n + 1, np.int64)
    for m in range(1, n):
        parent[m + 1] = np.int64(rng.random() * m) + 1
    return parent


@njit(cache=True)
def urt_height_diameter(rng, n, want_diameter):
    """Height (and optionally diameter) of a uniform recursive tree on n vertices."""
    parent = np.zeros(n + 1, np.int64)
    height = np.zeros(n + 1, np.int64)
    best = 0
    for m in range(1, n):
        p = np.int64(rng.random() * m) + 1
        parent[m + 1] = p
        h = height[p] + 1
        height[m + 1] = h
        if h > best:
            best = h
    diam = -1
    if want_diameter:
        diam = diameter_from_parents(parent)
    return best, diam


@njit(cache=True)
def wrt_height_diameter(rng, W, n, want_diameter):
    parent = np.zeros(n + 1, np.int64)
    height = np.zeros(n + 1, np.int64)
    best = 0
    for m in range(1, n):
        p = _search(W, m, rng.random() * W[m])
        parent[m + 1] = p
        h = height[p] + 1
        height[m + 1] = h
        if h > best:
            best = h
    diam = -1
    if want_diameter:
        diam = diameter_from_parents(parent)
    return best, diam


# -- Fenwick index over dynamic attachment weights ----------------------------


@njit(cache=True)
def _fw_add(tree, i, v):
    size = tree.shape[0] - 1
    while i <= size:
        tree[i] += v
        i += i & (-i)


@njit(cache=True)
def _fw_prefix(tree, i):
    s = 0.0
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


@njit(cache=True)
def _fw_find(tree, target, logsize):
    # smallest index whose cumulative weight exceeds target
    size = tree.shape[0] - 1
    j = 0
    half = logsize
    s = target
    while half > 0:
        k = j + half
        if k <= size and s >= tree[k]:
            j = k
            s -= tree[k]
        half >>= 1
    return j + 1


@njit(cache=True)
def pat_parents(rng, a, n):
    """PAT growth: father of vertex m+1 is k w.p. (outdeg_k + a_k) / (m - 1 + A_m)."""
    parent = np.zeros(n + 1, np.int64)
    if n < 2:
        return parent
    tree = np.zeros(n + 1)
    logsize = 1
    while logsize * 2 <= n:
        logsize *= 2
    _fw_add(tree, 1, a[1])
    parent[2] = 1
    _fw_add(tree, 1, 1.0)
    _fw_add(tree, 2, a[2])
    for m in range(2, n):
        total = _fw_prefix(tree, m)
        k = m + 1
        while k > m:
            k = _fw_find(tree, rng.random() * total, logsize)
        parent[m + 1] = k
        _fw_add(tree, k, 1.0)
        _fw_add(tree, m + 1, a[m + 1])
    return parent


# -- two distinguished vertices ------------------------------------------------


@njit(cache=True)
def spine_run(rng, pB, pBt, W, n):
    """Grow (T_n, D_n, D~_n) from Bernoulli drivers with parameters pB, pBt.

    Returns parent, labels of D_n and D~_n, and the driver arrays B, B~.
    """
    parent = np.zeros(n + 1, np.int64)
    b = np.zeros(n + 1, np.int64)
    bt = np.zeros(n + 1, np.int64)
    b[1] = 1
    bt[1] = 1
    d = 1
    dt = 1
    for m in range(1, n):
        i = m + 1
        bi = 1 if rng.random() < pB[i] else 0
        bti = 1 if rng.random() < pBt[i] else 0
        j = _search(W, m, rng.random() * W[m])
        b[i] = bi
        bt[i] = bti
        if bi == 1 and bti == 0:
            parent[i] = d
            d = i
        elif bi == 0 and bti == 1:
            parent[i] = dt
            dt = i
        elif bi == 0 and bti == 0:
            parent[i] = j
        else:
            parent[i] = d
            d = i
            dt = i
    return parent, d, dt, b, bt


@njit(cache=True)
def spine_batch(rng, pB, pBt, W, n, replicas):
    """Many independent spine runs; returns parents, D, D~ and I_n per run."""
    parents = np.zeros((replicas, n + 1), np.int64)
    ds = np.zeros(replicas, np.int64)
    dts = np.zeros(replicas, np.int64)
    meets = np.zeros(replicas, np.int64)
    for r in range(replicas):
        parent, d, dt, b, bt = spine_run(rng, pB, pBt, W, n)
        parents[r] = parent
        ds[r] = d
        dts[r] = dt
        meet = 1
        for k in range(2, n + 1):
            if b[k] == 1 and bt[k] == 1:
                meet = k
        meets[r] = meet
    return parents, ds, dts, meets


@njit(cache=True)
def mrca_labels(parent, height, u, v):
    while height[u] > height[v]:
        u = parent[u]
    while height[v] > height[u]:
        v = parent[v]
    while u != v:
        u = parent[u]
        v = parent[v]
    return u


# -- homogeneous walks and barrier events --------------------------------------


@njit(cache=True)
def _draw(cdf, u):
    # inverse-CDF draw from a table whose last entry is 1
    k = 0
    while k < cdf.shape[0] - 1 and u >= cdf[k]:
        k += 1
    return k


@njit(cache=True, nogil=True)
def renewal_ascending(rng, pois_cdf, x_max, samples):
    """Visits to 1..x_max of the Poisson(1)-1 walk killed on entering (-inf, 0].

    By time reversal, the expected number of visits to y equals the expected
    number of strict ascending ladder heights at y.  The walk cannot skip a
    level on the way down, so excursions above x_max are cut short by
    returning the walk straight to x_max.
    Returns per-level sums and sums of squares of the cumulative counts.
    """
    s1 = np.zeros(x_max + 1)
    s2 = np.zeros(x_max + 1)
    counts = np.zeros(x_max + 1, np.int64)
    for _ in range(samples):
        counts[:] = 0
        pos = 0
        while True:
            pos += _draw(pois_cdf, rng.random()) - 1
            if pos <= 0:
                break
            if pos > x_max:
                pos = x_max
            counts[pos] += 1
        c = 1
        s1[0] += 1.0
        s2[0] += 1.0
        for x in range(1, x_max + 1):
            c += counts[x]
            s1[x] += c
            s2[x] += c * c
    return s1, s2


@njit(cache=True, nogil=True)
def renewal_descending(rng, pois_cdf, x_max, samples, step_cap):
    """Ladder heights of the 1-Poisson(1) walk, epoch by epoch.

    Up-jumps are at most 1, so an epoch that closes lands exactly one above
    the running maximum; an epoch exceeding ``step_cap`` steps is closed there
    and counted as censored.
    """
    s1 = np.zeros(x_max + 1)
    s2 = np.zeros(x_max + 1)
    counts = np.zeros(x_max + 1, np.int64)
    epochs = 0
    censored = 0
    for _ in range(samples):
        counts[:] = 0
        level = 0
        counts[0] = 1
        while level <= x_max:
            pos = level
            steps = 0
            while pos <= level and steps < step_cap:
                pos += 1 - _draw(pois_cdf, rng.random())
                steps += 1
            epochs += 1
            if pos <= level:
                censored += 1
                pos = level + 1
            level = pos
            if level <= x_max:
                counts[level] += 1
        c = 0
        for x in range(x_max + 1):
            c += counts[x]
            s1[x] += c
            s2[x] += c * c
    return s1, s2, epochs, censored


@njit(cache=True, nogil=True)
def barrier_hits(rng, cdfs, K, L, target, split, replicas):
    """Count paths with S_k <= K for k < split, S_k <= L for k >= split, S_n = target.

    Row k-1 of ``cdfs`` is the CDF of block k's increment Y_k.
    """
    n = cdfs.shape[0]
    hits = 0
    for _ in range(replicas):
        s = 0
        ok = True
        if split <= 0 and s > L:
            ok = False
        k = 1
        while ok and k <= n:
            s += _draw(cdfs[k - 1], rng.random()) - 1
            if k < split:
                if s > K:
                    ok = False
            elif s > L:
                ok = False
            k += 1
        if ok and s == target:
            hits += 1
    return hits


@njit(cache=True)
def checkpoint_maxima(parent, height, kappa, early_last, late_first):
    """Running maxima of ``h(u_m(i_k)) - k`` over the early and late checkpoint windows.

    ``kappa[m]`` is the first checkpoint k with ``i_k >= m``; from k = kappa[m]
    on, the checkpoint ancestor of m is m itself, and before that it is the
    parent's.  Early window: k <= early_last; late window: late_first <= k.
    """
    n = parent.shape[0] - 1
    early = np.empty(n + 1, np.int64)
    late = np.empty(n + 1, np.int64)
    early[1] = 0
    late[1] = -late_first
    for m in range(2, n + 1):
        p = parent[m]
        km = kappa[m]
        e = early[p]
        if km <= early_last and height[m] - km > e:
            e = height[m] - km
        early[m] = e
        kl = km if km > late_first else late_first
        l = late[p]
        if height[m] - kl > l:
            l = height[m] - kl
        late[m] = l
    return early, late


@njit(cache=True)
def poisson_binomial(probs, tail, cap):
    """Pmf of a sum of Bernoulli(probs), dropping top entries of total mass < tail.

    Returns the unnormalized pmf and the number of terms touched; an empty
    pmf signals that ``cap`` was exceeded.
    """
    m = probs.shape[0]
    pmf = np.zeros(m + 1)
    pmf[0] = 1.0
    length = 1
    terms = 0
    for q in probs:
        pmf[length] = 0.0
        for k in range(length, 0, -1):
            pmf[k] = pmf[k] * (1.0 - q) + pmf[k - 1] * q
        pmf[0] *= 1.0 - q
        length += 1
        dropped = 0.0
        while length > 1 and dropped + pmf[length - 1] < tail:
            dropped += pmf[length - 1]
            pmf[length - 1] = 0.0
            length -= 1
        terms += length
        if terms > cap:
            return pmf[:0], terms
    return pmf[:length].copy(), terms
