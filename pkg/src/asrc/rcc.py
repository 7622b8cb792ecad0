"""Robust continuous clustering over a weighted graph.

Alternating minimization: each edge carries a closed-form robustness
weight (a squared Geman-McClure factor), and the representatives solve a
sparse SPD linear system. The fusion strength rebalances itself from the
spectral norms of the data and the weighted Laplacian, while the
robustness scale anneals down to half the merge threshold. Clusters are
read off the final representatives by connecting every pair closer than
the threshold.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DisconnectedWarning, EmptyGraph
from .numerics import (
    SparseSymOperator,
    cg_solve,
    matrix_spectral_norm,
    pairwise_dist,
    sym_operator_norm,
)


@dataclass
class RccConfig:
    """Knobs of the clustering sweep."""

    max_sweeps: int = 100          # hard cap on alternating sweeps
    update_interval: int = 4       # sweeps between lambda/alpha refreshes
    delta: float = 0.0             # merge threshold; 0 = mean NN distance
    u_tol: float = 1e-5            # relative representative movement stop
    cg_tol: float = 1e-8
    spectral_tol: float = 1e-9
    spectral_max_iter: int = 30000

    def __post_init__(self) -> None:
        if self.max_sweeps < 1 or self.update_interval < 1:
            raise ValueError("max_sweeps and update_interval must be >= 1")


@dataclass
class RccState:
    """Variables of the alternating minimization."""

    u: np.ndarray
    l: np.ndarray
    lam1: float
    alpha: float
    delta: float
    sweeps: int = 0


def update_l(
    u: np.ndarray, edges_i: np.ndarray, edges_j: np.ndarray, alpha: float
) -> np.ndarray:
    """Closed-form edge weights (alpha / (alpha + ||u_i - u_j||^2))^2."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    diff = u[edges_i] - u[edges_j]
    d2 = np.einsum("ij,ij->i", diff, diff)
    return (alpha / (alpha + d2)) ** 2


def assemble_system(
    n: int,
    edges_i: np.ndarray,
    edges_j: np.ndarray,
    w: np.ndarray,
    l: np.ndarray,
    lam1: float,
) -> SparseSymOperator:
    """Identity plus the lam1-weighted graph Laplacian of w * l."""
    return SparseSymOperator.identity_plus_laplacian(n, edges_i, edges_j, lam1 * w * l)


def assemble_and_solve_u(
    z: np.ndarray,
    edges_i: np.ndarray,
    edges_j: np.ndarray,
    w: np.ndarray,
    l: np.ndarray,
    lam1: float,
    tol: float = 1e-8,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Exact minimizer of the representatives for fixed edge weights."""
    if lam1 < 0:
        raise ValueError("lam1 must be nonnegative")
    if lam1 == 0.0 or edges_i.size == 0:
        return np.array(z, dtype=np.float64, copy=True)
    op = assemble_system(z.shape[0], edges_i, edges_j, w, l, lam1)
    return cg_solve(op, z, tol=tol, x0=x0)


def update_lambda1(
    z: np.ndarray,
    edges_i: np.ndarray,
    edges_j: np.ndarray,
    w: np.ndarray,
    l: np.ndarray,
    rng: np.random.Generator,
    z_norm: float | None = None,
    tol: float = 1e-9,
    max_iter: int = 30000,
    v0: np.ndarray | None = None,
    return_vector: bool = False,
) -> float | tuple[float, np.ndarray]:
    """Fusion strength balancing the data and regularizer operator norms.

    ``v0`` warm-starts the power iteration; across refreshes the top
    eigenvector of the weighted Laplacian moves slowly, so reusing it cuts
    the iteration count by orders of magnitude.
    """
    coeff = w * l
    if edges_i.size == 0 or not np.any(coeff > 0):
        raise EmptyGraph("no positively weighted edges")
    if z_norm is None:
        z_norm = matrix_spectral_norm(z, tol=tol, max_iter=max_iter, rng=rng)
    lap = SparseSymOperator.weighted_laplacian(z.shape[0], edges_i, edges_j, coeff)
    out = sym_operator_norm(
        lap.apply, z.shape[0], tol=tol, max_iter=max_iter, rng=rng,
        v0=v0, return_vector=True,
    )
    lap_norm, vec = out
    if lap_norm == 0.0:
        raise EmptyGraph("regularizer operator has zero norm")
    lam = z_norm / lap_norm
    return (lam, vec) if return_vector else lam


def anneal_alpha(alpha: float, delta: float) -> float:
    """Halve the robustness scale, floored at half the merge threshold."""
    if alpha <= 0 or delta <= 0:
        raise ValueError("alpha and delta must be positive")
    return max(alpha / 2.0, delta / 2.0)


def rcc_objective(
    u: np.ndarray,
    l: np.ndarray,
    z: np.ndarray,
    edges_i: np.ndarray,
    edges_j: np.ndarray,
    w: np.ndarray,
    lam1: float,
    alpha: float,
) -> float:
    """Exact value of the robust clustering objective (for monotonicity checks)."""
    data = 0.5 * float(np.sum((u - z) ** 2))
    diff = u[edges_i] - u[edges_j]
    d2 = np.einsum("ij,ij->i", diff, diff)
    reg = 0.5 * lam1 * float(np.sum(w * (l * d2 + alpha * (np.sqrt(l) - 1.0) ** 2)))
    return data + reg


class UnionFind:
    """Disjoint sets with path compression and union by rank."""

    def __init__(self, size: int):
        self.parent = np.arange(size, dtype=np.int64)
        self.rank = np.zeros(size, dtype=np.int64)

    def find(self, u: int) -> int:
        root = u
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[u] != root:
            self.parent[u], u = root, self.parent[u]
        return root

    def union(self, u: int, v: int) -> None:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return
        if self.rank[ru] < self.rank[rv]:
            ru, rv = rv, ru
        self.parent[rv] = ru
        if self.rank[ru] == self.rank[rv]:
            self.rank[ru] += 1


def relabel_contiguous(labels: np.ndarray) -> np.ndarray:
    """Map labels to 0..c-1 in order of first occurrence."""
    labels = np.asarray(labels)
    out = np.empty(labels.size, dtype=np.int64)
    seen: dict = {}
    for idx, lab in enumerate(labels.tolist()):
        if lab not in seen:
            seen[lab] = len(seen)
        out[idx] = seen[lab]
    return out


def extract_clusters(u: np.ndarray, delta: float, block: int = 512) -> np.ndarray:
    """Connected components of the 'closer than delta' relation on all pairs.

    The scan is exact (every pair is tested, in blocks), so the result does
    not depend on which pairs happened to be graph edges.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[0]
    uf = UnionFind(n)
    thresh = delta * delta
    sq = np.einsum("ij,ij->i", u, u)
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = (
            sq[start:stop, None]
            + sq[None, :]
            - 2.0 * (u[start:stop] @ u.T)
        )
        rows, cols = np.nonzero(d2 < thresh)
        rows += start
        for r, c in zip(rows.tolist(), cols.tolist()):
            if r < c:
                uf.union(r, c)
    roots = np.fromiter((uf.find(i) for i in range(n)), dtype=np.int64, count=n)
    return relabel_contiguous(roots)


def mutual_knn_graph(
    x: np.ndarray, k: int, metric: str = "euclidean"
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mutual k-nearest-neighbour edges with Gaussian kernel weights.

    Edge (i, j) survives only when each endpoint is among the other's k
    nearest. The kernel bandwidth is the mean distance to the k-th
    neighbour. Returns (i, j, w) arrays with i < j; isolated nodes are
    reported through DisconnectedWarning.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k={k} must lie in [1, {n - 1}]")
    if metric == "euclidean":
        dist = pairwise_dist(x)
    elif metric == "cosine":
        norms = np.sqrt(np.einsum("ij,ij->i", x, x) + 1e-12)
        sims = (x / norms[:, None]) @ (x / norms[:, None]).T
        dist = np.clip(1.0 - sims, 0.0, None)
        np.fill_diagonal(dist, 0.0)
    else:
        raise ValueError(f"unknown metric {metric!r}")

    order = np.argsort(dist, axis=1, kind="stable")
    neighbours = np.empty((n, k), dtype=np.int64)
    kth_dist = np.empty(n)
    for i in range(n):
        row = order[i]
        row = row[row != i][:k]
        neighbours[i] = row
        kth_dist[i] = dist[i, row[-1]]

    is_neigh = np.zeros((n, n), dtype=bool)
    np.put_along_axis(is_neigh, neighbours, True, axis=1)
    mutual = is_neigh & is_neigh.T
    ei, ej = np.nonzero(np.triu(mutual, k=1))

    sigma = float(kth_dist.mean())
    if sigma <= 0:
        sigma = 1.0
    w = np.exp(-(dist[ei, ej] ** 2) / (2.0 * sigma * sigma))

    degree = np.zeros(n, dtype=np.int64)
    np.add.at(degree, ei, 1)
    np.add.at(degree, ej, 1)
    isolated = np.nonzero(degree == 0)[0]
    if isolated.size:
        warnings.warn(
            f"mutual kNN left {isolated.size} isolated nodes: "
            f"{isolated.tolist()[:20]}",
            DisconnectedWarning,
            stacklevel=2,
        )
    return ei.astype(np.int64), ej.astype(np.int64), w


def auto_delta(z: np.ndarray, edges_i: np.ndarray, edges_j: np.ndarray) -> float:
    """Mean length of the graph edges the solver will try to fuse.

    The edge set defines which pairs the objective can merge at all, so its
    length scale is the natural default for the merge threshold (and, via
    the annealing floor, keeps those same edges from being severed while
    they are still contracting). A nearest-neighbour scale is too timid:
    roughly half of all chained pairs sit above it by construction.
    """
    diff = z[edges_i] - z[edges_j]
    lengths = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    val = float(lengths.mean()) if lengths.size else 0.0
    if not np.isfinite(val) or val <= 0.0:
        val = 1e-8
    return val


def rcc_run(
    z: np.ndarray,
    edges_i: np.ndarray,
    edges_j: np.ndarray,
    w: np.ndarray,
    cfg: RccConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, RccState]:
    """Full alternating minimization followed by threshold extraction."""
    z = np.asarray(z, dtype=np.float64)
    if edges_i.size == 0:
        raise EmptyGraph("clustering needs at least one edge")
    n = z.shape[0]

    delta = cfg.delta if cfg.delta > 0 else auto_delta(z, edges_i, edges_j)
    diff = z[edges_i] - z[edges_j]
    max_d2 = float(np.max(np.einsum("ij,ij->i", diff, diff)))
    alpha = 3.0 * max_d2
    if alpha <= 0.0:
        alpha = max(delta / 2.0, 1e-8)

    u = z.copy()
    l = np.ones(edges_i.size)
    z_norm = matrix_spectral_norm(
        z, tol=cfg.spectral_tol, max_iter=cfg.spectral_max_iter, rng=rng
    )
    lam1, lap_vec = update_lambda1(
        z, edges_i, edges_j, w, l, rng, z_norm=z_norm,
        tol=cfg.spectral_tol, max_iter=cfg.spectral_max_iter,
        return_vector=True,
    )

    sweeps = 0
    alpha_floor = delta / 2.0
    for sweep in range(1, cfg.max_sweeps + 1):
        l = update_l(u, edges_i, edges_j, alpha)
        u_new = assemble_and_solve_u(
            z, edges_i, edges_j, w, l, lam1, tol=cfg.cg_tol, x0=u
        )
        move = np.sqrt(np.einsum("ij,ij->i", u_new - u, u_new - u))
        scale = 1.0 + np.sqrt(np.einsum("ij,ij->i", u, u))
        converged = float((move / scale).max()) < cfg.u_tol
        u = u_new
        sweeps = sweep
        if sweep % cfg.update_interval == 0:
            lam1, lap_vec = update_lambda1(
                z, edges_i, edges_j, w, l, rng, z_norm=z_norm,
                tol=cfg.spectral_tol, max_iter=cfg.spectral_max_iter,
                v0=lap_vec, return_vector=True,
            )
            alpha = anneal_alpha(alpha, delta)
        # The annealing path must play out: representatives settle between
        # refreshes long before the robustness scale reaches its floor.
        if converged and alpha <= alpha_floor * (1.0 + 1e-12):
            break

    labels = extract_clusters(u, delta)
    state = RccState(u=u, l=l, lam1=lam1, alpha=alpha, delta=delta, sweeps=sweeps)
    return labels, state
