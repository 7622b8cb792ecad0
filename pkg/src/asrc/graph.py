"""Adaptive sparse graph construction from embedding distances.

Each node gets a sparse probability row over its nearest candidates (the
node itself included, so self-loops form adaptively and no row is ever
empty). Rows come from a closed form when the prior is uniform, and from
the general sparse-simplex solver otherwise. The directed rows are then
averaged into a symmetric weighted graph with a normalized operator for
the encoder and an explicit edge list for the clustering stage.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from .exceptions import IsolatedNode
from .numerics import pairwise_dist

# Denominators at or below this are treated as degenerate ties.
_DEGENERATE_EPS = 1e-15


def project_simplex(c: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``c`` onto {p >= 0, sum(p) = 1}.

    Sort descending, find the last prefix whose running threshold keeps the
    entry positive, subtract that threshold and clip.
    """
    c = np.asarray(c, dtype=np.float64)
    desc = np.sort(c)[::-1]
    prefix = np.cumsum(desc)
    j = np.arange(1, c.size + 1)
    positive = desc - (prefix - 1.0) / j > 0.0
    r = int(np.nonzero(positive)[0][-1]) + 1
    theta = (prefix[r - 1] - 1.0) / r
    return np.maximum(c - theta, 0.0)


def solve_prior_problem(
    d: np.ndarray, q: np.ndarray, gamma: float, k: int
) -> np.ndarray:
    """Sparse probability row minimising <p, d> + (gamma/2)||p - q||^2.

    Constraints: p in the simplex with at most ``k`` nonzeros. Shift the
    prior by the scaled costs, keep the k largest shifted scores (ties
    broken toward the lower index) and project that subvector onto the
    k-simplex; everything else is zero.
    """
    d = np.asarray(d, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n = d.size
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    c = q - d / gamma
    # Descending by score, ascending index on ties.
    order = np.lexsort((np.arange(n), -c))
    support = order[:k]
    p = np.zeros(n)
    p[support] = project_simplex(c[support])
    return p


def sparsity_dual_value(d_row: np.ndarray, k: int) -> float:
    """Regularizer value at which the uniform-prior row solution has
    support exactly on the k nearest candidates.

    Equals k * d_(k+1) - sum_{m<=k} d_(m) with d_(m) the m-th smallest
    distance; at this value the (k+1)-th candidate sits exactly on the
    boundary of the support.
    """
    d_row = np.asarray(d_row, dtype=np.float64)
    n = d_row.size
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} must lie in [1, {n - 1}]")
    ds = np.sort(d_row)
    return float(k * ds[k] - ds[:k].sum())


def learn_row_probabilities(d_row: np.ndarray, k: int) -> np.ndarray:
    """Closed-form sparse probability row from one node's distance vector.

    p_j = (d_(k+1) - d_j)_+ / (k d_(k+1) - sum_{m<=k} d_(m)); exactly the k
    nearest candidates (self included, at distance zero) can receive mass.
    When the k+1 smallest distances all coincide the denominator vanishes
    and the row falls back to uniform 1/k over the k nearest, ties broken
    by ascending index.
    """
    d_row = np.asarray(d_row, dtype=np.float64)
    n = d_row.size
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} must lie in [1, {n - 1}]")
    if not np.all(np.isfinite(d_row)):
        raise ValueError("distances must be finite")
    order = np.lexsort((np.arange(n), d_row))
    dk1 = d_row[order[k]]
    denom = k * dk1 - d_row[order[:k]].sum()
    p = np.zeros(n)
    if denom <= _DEGENERATE_EPS:
        p[order[:k]] = 1.0 / k
    else:
        np.maximum(dk1 - d_row, 0.0, out=p)
        p /= denom
        # Entries tied with d_(k+1) outside the k nearest got exactly zero.
    return p


@dataclass
class SparseRowGraph:
    """Row-stochastic sparse connection probabilities, one row per node."""

    mat: sparse.csr_array
    k: int

    @property
    def n(self) -> int:
        return self.mat.shape[0]


def build_row_graph(dist: np.ndarray, k: int) -> SparseRowGraph:
    """All rows of the closed-form update, vectorised over the nodes.

    ``dist`` is the dense symmetric distance matrix between current
    embeddings (zero diagonal, so every node is its own nearest candidate).
    """
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} must lie in [1, {n - 1}]")
    # Stable sort: ascending distance, ascending index on ties.
    order = np.argsort(dist, axis=1, kind="stable")
    nearest = order[:, :k]
    ds = np.take_along_axis(dist, order[:, : k + 1], axis=1)
    dk1 = ds[:, k]
    denom = k * dk1 - ds[:, :k].sum(axis=1)
    degenerate = denom <= _DEGENERATE_EPS

    vals = dk1[:, None] - ds[:, :k]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = vals / denom[:, None]
    vals[degenerate] = 1.0 / k

    indptr = np.arange(0, n * k + 1, k)
    mat = sparse.csr_array(
        (vals.ravel(), nearest.ravel(), indptr), shape=(n, n)
    )
    mat.sort_indices()
    mat.eliminate_zeros()
    return SparseRowGraph(mat=mat, k=k)


def row_graph_from_embeddings(z: np.ndarray, k: int) -> SparseRowGraph:
    return build_row_graph(pairwise_dist(z), k)


@dataclass
class SymGraph:
    """Symmetrised weighted graph with its normalized operator.

    ``adjacency`` is the average of the directed rows and their transpose;
    self-loops are whatever the rows learned, nothing is injected. The
    clustering stage consumes ``rcc_edges_*`` (off-diagonal support, i < j)
    while the encoder consumes ``normalized``.
    """

    adjacency: sparse.csr_array
    normalized: sparse.csr_array
    degrees: np.ndarray
    rcc_edges_i: np.ndarray
    rcc_edges_j: np.ndarray
    rcc_edges_w: np.ndarray

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]


def symmetrize_normalize(p: SparseRowGraph) -> SymGraph:
    """Average a row graph with its transpose and degree-normalise it."""
    a = ((p.mat + p.mat.T) * 0.5).tocsr()
    degrees = np.asarray(a.sum(axis=1)).ravel()
    if np.any(degrees <= 0.0):
        bad = np.nonzero(degrees <= 0.0)[0]
        raise IsolatedNode(f"nodes with zero degree: {bad.tolist()}")
    dinv_sqrt = 1.0 / np.sqrt(degrees)
    normalized = a.multiply(dinv_sqrt[:, None]).multiply(dinv_sqrt[None, :]).tocsr()
    upper = sparse.triu(a, k=1).tocoo()
    return SymGraph(
        adjacency=a,
        normalized=normalized,
        degrees=degrees,
        rcc_edges_i=upper.row.astype(np.int64),
        rcc_edges_j=upper.col.astype(np.int64),
        rcc_edges_w=upper.data.astype(np.float64),
    )


@dataclass(frozen=True)
class SparsitySchedule:
    """Linearly growing neighbourhood size, capped at n - 1."""

    k0: int
    s: int
    t1: int
    n: int
    k: int
    iteration: int = 0

    @classmethod
    def start(cls, k0: int, s: int, t1: int, n: int) -> "SparsitySchedule":
        if k0 < 2:
            raise ValueError("initial sparsity k0 must be at least 2")
        if k0 > n - 1:
            raise ValueError(f"k0={k0} exceeds n-1={n - 1}")
        return cls(k0=k0, s=s, t1=t1, n=n, k=k0)


def advance_sparsity(sched: SparsitySchedule) -> SparsitySchedule:
    new_k = min(sched.k + sched.s, sched.n - 1)
    return replace(sched, k=new_k, iteration=sched.iteration + 1)
