"""Growth, measurement and exact enumeration of recursive trees.

Trees are flat arrays indexed by label (1..n); index 0 is padding and the
root's parent is stored as 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from . import _kernels as K
from .weights import FitnessSequence, WeightSequence

ENUMERATION_CAP = 9


@dataclass(frozen=True, eq=False)
class Tree:
    parent: np.ndarray
    height: np.ndarray
    outdeg: np.ndarray

    @property
    def n(self) -> int:
        return self.parent.shape[0] - 1

    @classmethod
    def from_parents(cls, parent) -> "Tree":
        parent = np.asarray(parent, dtype=np.int64)
        n = parent.shape[0] - 1
        if n < 1:
            raise ValueError("a tree needs at least one vertex")
        labels = np.arange(2, n + 1)
        if np.any(parent[2:] < 1) or np.any(parent[2:] >= labels):
            raise ValueError("parent[i] must lie in 1..i-1 for every i >= 2")
        parent = parent.copy()
        parent[:2] = 0
        h, d = K.heights_outdeg(parent)
        return cls(parent, h, d)

    @classmethod
    def from_parent_list(cls, parents_2_to_n) -> "Tree":
        """Build from ``[parent(2), ..., parent(n)]``."""
        return cls.from_parents([0, 0, *parents_2_to_n])

    def ancestors(self, v: int) -> list[int]:
        """Labels on the path from the root to ``v`` (inclusive)."""
        path = [v]
        while v != 1:
            v = int(self.parent[v])
            path.append(v)
        return path[::-1]

    def trajectory(self, v: int) -> np.ndarray:
        """Heights ``h(u_v(k))`` for ``k = 1..n`` (entry ``k-1``).

        ``u_v(k)`` is the most recent ancestor of ``v`` with label at most ``k``.
        """
        traj = np.zeros(self.n, dtype=np.int64)
        for lab in self.ancestors(v)[1:]:
            traj[lab - 1:] += 1
        return traj

    def shape_index(self) -> int:
        return shape_index(self.parent)

    def to_text(self) -> str:
        return f"{self.n}\n{' '.join(str(int(p)) for p in self.parent[2:])}\n"

    @classmethod
    def from_text(cls, text: str) -> "Tree":
        lines = text.split("\n")
        n = int(lines[0].strip())
        rest = lines[1].split() if len(lines) > 1 else []
        if len(rest) != n - 1:
            raise ValueError(f"expected {n - 1} parent labels, found {len(rest)}")
        return cls.from_parent_list([int(x) for x in rest])

    def __eq__(self, other):
        return isinstance(other, Tree) and np.array_equal(self.parent, other.parent)


def shape_index(parent) -> int:
    """Mixed-radix code of a recursive tree: parent(m) has m-1 choices."""
    code = 0
    radix = 1
    for m in range(2, len(parent)):
        code += (int(parent[m]) - 1) * radix
        radix *= m - 1
    return code


def grow_wrt(seq: WeightSequence, n: int, rng=None) -> Tree:
    """Weighted recursive tree: vertex m+1 picks father k w.p. ``w_k / W_m``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(rng)
    if seq.kind == "constant":
        parent = K.urt_parents(rng, n)
    else:
        W = seq.prefix(n)
        if W[1] <= 0:
            raise ValueError("w_1 must be positive")
        parent = K.wrt_parents(rng, np.ascontiguousarray(W), n)
    h, d = K.heights_outdeg(parent)
    return Tree(parent, h, d)


def grow_pat(fit: FitnessSequence, n: int, rng=None) -> Tree:
    """Preferential attachment with additive fitnesses; vertex 2 always joins the root."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(rng)
    a = np.ascontiguousarray(fit.values(max(n, 2)))
    parent = K.pat_parents(rng, a, n)
    h, d = K.heights_outdeg(parent)
    return Tree(parent, h, d)


def height(tree: Tree) -> int:
    return int(tree.height.max())


def diameter(tree: Tree) -> int:
    return int(K.diameter_from_parents(tree.parent))


def mrca(tree: Tree, u: int, v: int) -> int:
    """Label of the most recent common ancestor, by walking up the tree."""
    return int(K.mrca_labels(tree.parent, tree.height, u, v))


def collapse(tree: Tree, N: int) -> Tree:
    """Re-hang vertices ``2..N`` and every child of a vertex ``<= N`` on the root.

    Labels are kept: vertices ``2..N`` stay in the tree as leaves of the root.
    """
    if N < 1 or N > tree.n:
        raise ValueError(f"need 1 <= N <= n, got N={N}, n={tree.n}")
    parent = tree.parent.copy()
    parent[2:] = np.where(parent[2:] <= N, 1, parent[2:])
    parent[:2] = 0
    h, d = K.heights_outdeg(parent)
    return Tree(parent, h, d)


@dataclass(frozen=True)
class EnumeratedTree:
    tree: Tree
    probability: float


def iter_parent_arrays(n: int) -> Iterator[tuple[int, ...]]:
    """Every recursive tree on n vertices as a tuple ``(parent(2), ..., parent(n))``."""
    return itertools.product(*[range(1, m) for m in range(2, n + 1)])


def enumerate_wrt(seq: WeightSequence, n: int) -> list[EnumeratedTree]:
    """All (n-1)! recursive trees with their WRT probabilities, in shape-index order."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > ENUMERATION_CAP:
        raise ValueError(f"enumeration is capped at n={ENUMERATION_CAP}")
    w, W = seq.weights(n), seq.prefix(n)
    out = []
    for par in iter_parent_arrays(n):
        prob = 1.0
        for m, p in enumerate(par, start=2):
            prob *= w[p] / W[m - 1]
        out.append(EnumeratedTree(Tree.from_parent_list(par), prob))
    out.sort(key=lambda e: e.tree.shape_index())
    return out


def pat_tree_probability(fit: FitnessSequence, parents_2_to_n) -> float:
    """Exact PAT probability of a recursive tree given as its parent list."""
    n = len(parents_2_to_n) + 1
    a, A = fit.values(n), fit.prefix(n)
    outdeg = np.zeros(n + 1)
    prob = 1.0
    for m, p in enumerate(parents_2_to_n, start=1):
        # attaching vertex m+1 to a tree on m vertices
        if m > 1:
            prob *= (outdeg[p] + a[p]) / (m - 1 + A[m])
        elif p != 1:
            return 0.0
        outdeg[p] += 1
    return prob


def write_tree(tree: Tree, path) -> None:
    Path(path).write_text(tree.to_text())


def read_tree(path) -> Tree:
    return Tree.from_text(Path(path).read_text())
