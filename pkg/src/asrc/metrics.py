"""External clustering agreement scores and a seeded kmeans++ utility.

Both scores are chance-adjusted: the rand-index adjustment uses the usual
pair-counting expectation, and the mutual-information adjustment sums the
exact hypergeometric expectation cell by cell (natural logarithms,
arithmetic-mean normalization). No Monte Carlo anywhere, so results are
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import LengthMismatch
from .rcc import relabel_contiguous


@dataclass
class ContingencyTable:
    counts: np.ndarray      # predicted clusters x true classes
    row_marginals: np.ndarray
    col_marginals: np.ndarray
    n: int


def contingency(a: np.ndarray, b: np.ndarray) -> ContingencyTable:
    """Joint label counts of two assignments over the same samples."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"label arrays differ: {a.shape} vs {b.shape}")
    ra = relabel_contiguous(a)
    rb = relabel_contiguous(b)
    ca = int(ra.max()) + 1
    cb = int(rb.max()) + 1
    counts = np.zeros((ca, cb), dtype=np.int64)
    np.add.at(counts, (ra, rb), 1)
    return ContingencyTable(
        counts=counts,
        row_marginals=counts.sum(axis=1),
        col_marginals=counts.sum(axis=0),
        n=int(a.size),
    )


def _same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.array_equal(relabel_contiguous(a), relabel_contiguous(b)))


def adjusted_rand_index(a: np.ndarray, b: np.ndarray) -> float:
    """Pair-counting agreement, adjusted for chance; 1 for equal partitions.

    When both partitions are degenerate (each single-cluster or each
    all-singletons) the adjustment is 0/0; the convention is 1 because the
    partitions are then equal.
    """
    table = contingency(a, b)
    if table.n < 2:
        raise ValueError("need at least two samples")

    def comb2(x: np.ndarray) -> np.ndarray:
        x = x.astype(np.float64)
        return x * (x - 1.0) / 2.0

    sum_cells = float(comb2(table.counts).sum())
    sum_a = float(comb2(table.row_marginals).sum())
    sum_b = float(comb2(table.col_marginals).sum())
    total = table.n * (table.n - 1.0) / 2.0
    expected = sum_a * sum_b / total
    denom = 0.5 * (sum_a + sum_b) - expected
    if denom == 0.0:
        return 1.0 if _same_partition(a, b) else 0.0
    return (sum_cells - expected) / denom


def _entropy(marginals: np.ndarray, n: int) -> float:
    p = marginals[marginals > 0] / n
    return float(-np.sum(p * np.log(p)))


def _mutual_info(table: ContingencyTable) -> float:
    n = table.n
    nz = table.counts > 0
    nij = table.counts[nz].astype(np.float64)
    outer = np.outer(table.row_marginals, table.col_marginals)[nz].astype(np.float64)
    return float(np.sum((nij / n) * (np.log(nij * n) - np.log(outer))))


def expected_mutual_info(
    row_marginals: np.ndarray, col_marginals: np.ndarray, n: int
) -> float:
    """Exact expectation of the mutual information under random permutation
    of one labelling with both marginals fixed (hypergeometric model)."""
    emi = 0.0
    log_n = np.log(n)
    gln_n = gammaln(n + 1)
    for ai in row_marginals.tolist():
        for bj in col_marginals.tolist():
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            log_term = np.log(nij) + log_n - np.log(ai) - np.log(bj)
            log_prob = (
                gammaln(ai + 1)
                + gammaln(bj + 1)
                + gammaln(n - ai + 1)
                + gammaln(n - bj + 1)
                - gln_n
                - gammaln(nij + 1)
                - gammaln(ai - nij + 1)
                - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            emi += float(np.sum((nij / n) * log_term * np.exp(log_prob)))
    return emi


def adjusted_mutual_info(a: np.ndarray, b: np.ndarray) -> float:
    """Mutual information adjusted by its permutation-model expectation,
    normalized by the arithmetic mean of the two entropies."""
    table = contingency(a, b)
    if _same_partition(a, b):
        return 1.0
    h_a = _entropy(table.row_marginals, table.n)
    h_b = _entropy(table.col_marginals, table.n)
    if h_a == 0.0 and h_b == 0.0:
        # Both single-cluster partitions are equal, handled above; differing
        # zero-entropy partitions cannot occur at equal lengths.
        return 0.0
    mi = _mutual_info(table)
    emi = expected_mutual_info(table.row_marginals, table.col_marginals, table.n)
    denom = 0.5 * (h_a + h_b) - emi
    if denom <= 0.0:
        return 0.0
    return (mi - emi) / denom


def kmeans_pp(
    z: np.ndarray,
    c: int,
    rng: np.random.Generator,
    n_init: int = 10,
    max_iter: int = 300,
    tol: float = 1e-4,
) -> np.ndarray:
    """Best-of-``n_init`` Lloyd runs with kmeans++ seeding.

    Deterministic under the generator; the winner is the run with the
    lowest within-cluster sum of squares.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if not 1 <= c <= n:
        raise ValueError(f"cluster count c={c} must lie in [1, {n}]")

    best_labels: np.ndarray | None = None
    best_cost = np.inf
    for _ in range(n_init):
        centers = _seed_plus_plus(z, c, rng)
        labels, cost = _lloyd(z, centers, max_iter, tol)
        if cost < best_cost:
            best_cost = cost
            best_labels = labels
    assert best_labels is not None
    return relabel_contiguous(best_labels)


def _seed_plus_plus(z: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    centers = np.empty((c, z.shape[1]))
    first = int(rng.integers(n))
    centers[0] = z[first]
    d2 = np.einsum("ij,ij->i", z - centers[0], z - centers[0])
    for m in range(1, c):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[m] = z[idx]
        cand = np.einsum("ij,ij->i", z - centers[m], z - centers[m])
        np.minimum(d2, cand, out=d2)
    return centers


def _dist2_to_centers(z: np.ndarray, centers: np.ndarray) -> np.ndarray:
    zz = np.einsum("ij,ij->i", z, z)[:, None]
    cc = np.einsum("ij,ij->i", centers, centers)[None, :]
    d2 = zz + cc - 2.0 * (z @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _lloyd(
    z: np.ndarray, centers: np.ndarray, max_iter: int, tol: float
) -> tuple[np.ndarray, float]:
    c = centers.shape[0]
    labels = np.zeros(z.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        d2 = _dist2_to_centers(z, centers)
        labels = d2.argmin(axis=1)
        new_centers = centers.copy()
        for m in range(c):
            members = labels == m
            if np.any(members):
                new_centers[m] = z[members].mean(axis=0)
            else:
                # Re-seat an empty cluster at the worst-served point.
                worst = int(d2[np.arange(z.shape[0]), labels].argmax())
                new_centers[m] = z[worst]
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break
    d2 = _dist2_to_centers(z, centers)
    labels = d2.argmin(axis=1)
    cost = float(d2[np.arange(z.shape[0]), labels].sum())
    return labels, cost
