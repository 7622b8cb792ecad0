"""Dense and sparse linear-algebra kernels used by every other module.

All floating-point work is 64-bit. Functions are pure; nothing here keeps
state between calls.
"""

from __future__ import annotations

import warnings
from typing import Callable

import numpy as np
from scipy import sparse

from .exceptions import (
    NonConvergence,
    NotPositiveDefinite,
    RankDeficientWarning,
    ShapeMismatch,
)


class SparseSymOperator:
    """Symmetric sparse matrix with a cached diagonal.

    Stored as CSR with both triangles materialised so mat-vec products are a
    single pass. The constructors below cover the two shapes the clustering
    sweep needs: a bare weighted graph Laplacian and identity + Laplacian.
    """

    def __init__(self, mat: sparse.csr_array):
        if mat.shape[0] != mat.shape[1]:
            raise ShapeMismatch(f"operator must be square, got {mat.shape}")
        self.mat = mat
        self.n = mat.shape[0]
        self.diag = mat.diagonal()

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "SparseSymOperator":
        return cls(sparse.csr_array(np.asarray(a, dtype=np.float64)))

    @classmethod
    def weighted_laplacian(
        cls, n: int, edges_i: np.ndarray, edges_j: np.ndarray, coeff: np.ndarray
    ) -> "SparseSymOperator":
        """sum_e coeff_e (e_i - e_j)(e_i - e_j)^T for edges (i, j), i != j."""
        rows = np.concatenate([edges_i, edges_j, edges_i, edges_j])
        cols = np.concatenate([edges_i, edges_j, edges_j, edges_i])
        vals = np.concatenate([coeff, coeff, -coeff, -coeff])
        mat = sparse.coo_array((vals, (rows, cols)), shape=(n, n)).tocsr()
        return cls(mat)

    @classmethod
    def identity_plus_laplacian(
        cls, n: int, edges_i: np.ndarray, edges_j: np.ndarray, coeff: np.ndarray
    ) -> "SparseSymOperator":
        lap = cls.weighted_laplacian(n, edges_i, edges_j, coeff)
        eye = sparse.identity(n, format="csr", dtype=np.float64)
        return cls((lap.mat + eye).tocsr())

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.mat @ v


def cg_solve(
    op: SparseSymOperator,
    rhs: np.ndarray,
    tol: float = 1e-8,
    max_iter: int | None = None,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Solve op @ U = rhs for a symmetric positive-definite operator.

    Jacobi-preconditioned conjugate gradients, all right-hand-side columns
    advanced together with per-column step sizes. Terminates when the
    Frobenius-norm relative residual drops below ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(rhs, dtype=np.float64)
    single_col = b.ndim == 1
    if single_col:
        b = b[:, None]
    if b.shape[0] != op.n:
        raise ShapeMismatch(f"rhs has {b.shape[0]} rows, operator is {op.n}x{op.n}")
    if max_iter is None:
        max_iter = 10 * op.n + 100

    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        x = np.zeros_like(b)
        return x[:, 0] if single_col else x

    dinv = 1.0 / np.where(op.diag != 0.0, op.diag, 1.0)
    if x0 is not None:
        x = np.array(x0, dtype=np.float64, copy=True)
        if single_col and x.ndim == 1:
            x = x[:, None]
        r = b - op.apply(x)
    else:
        x = np.zeros_like(b)
        r = b.copy()
    z = r * dinv[:, None]
    p = z.copy()
    rz = np.einsum("ij,ij->j", r, z)

    target = tol * b_norm
    for _ in range(max_iter):
        if np.linalg.norm(r) <= target:
            return x[:, 0] if single_col else x
        ap = op.apply(p)
        pap = np.einsum("ij,ij->j", p, ap)
        # Columns whose residual is already negligible are frozen.
        live = rz > 1e-300
        if np.any(pap[live] <= 0.0):
            bad = pap[live].min()
            if bad < -1e-12 * np.einsum("ij,ij->j", p, p)[live].max():
                raise NotPositiveDefinite(
                    f"curvature p^T A p = {bad:.3e} is negative"
                )
            raise NotPositiveDefinite("conjugate-gradient breakdown: zero curvature")
        alpha = np.where(live, rz / np.where(pap > 0.0, pap, 1.0), 0.0)
        x += alpha * p
        r -= alpha * ap
        z = r * dinv[:, None]
        rz_new = np.einsum("ij,ij->j", r, z)
        beta = np.where(live, rz_new / np.where(rz > 0.0, rz, 1.0), 0.0)
        p = z + beta * p
        rz = rz_new
    if np.linalg.norm(r) <= target:
        return x[:, 0] if single_col else x
    raise NonConvergence(
        f"CG did not reach relative residual {tol:.1e} in {max_iter} iterations"
    )


def sym_operator_norm(
    apply_fn: Callable[[np.ndarray], np.ndarray],
    n: int,
    tol: float = 1e-9,
    max_iter: int = 1000,
    rng: np.random.Generator | None = None,
    v0: np.ndarray | None = None,
    return_vector: bool = False,
) -> float | tuple[float, np.ndarray]:
    """Largest absolute eigenvalue of a symmetric operator.

    Power iteration on the squared action: each step applies the operator
    twice, so eigenvalues of opposite sign cannot cancel and the estimate
    ``||A v||`` converges monotonically in the gap ratio. Single random
    start vector; deterministic under ``rng``.

    Stops when successive estimates change by at most ``tol`` relatively,
    or earlier when the eigenpair residual certifies that accuracy. With a
    tightly clustered top of the spectrum the change may stall above
    ``tol``; the residual theorem for symmetric operators still bounds the
    error, so at the iteration cap the best estimate is returned as long
    as it is certified to 1e-4 relative, and NonConvergence is raised only
    beyond that.
    """
    if n < 1:
        raise ValueError("operator dimension must be >= 1")
    if v0 is not None:
        v = np.array(v0, dtype=np.float64, copy=True)
    else:
        gen = rng if rng is not None else np.random.default_rng(0)
        v = gen.standard_normal(n)
    nv = np.linalg.norm(v)
    if nv == 0.0:  # pragma: no cover - standard_normal never returns all zeros
        v = np.ones(n)
        nv = np.sqrt(float(n))
    v /= nv

    def done(value, vector):
        return (value, vector) if return_vector else value

    est_prev = np.inf
    best_est = 0.0
    best_cert = np.inf
    for _ in range(max_iter):
        w = apply_fn(v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return done(0.0, v)
        u = apply_fn(w / est)
        # |est - lambda_nearest| <= ||u - est v|| for unit v (symmetric A).
        cert = float(np.linalg.norm(u - est * v)) / est
        if cert < best_cert:
            best_cert = cert
            best_est = est
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return done(est, v)
        v = u / nu
        if cert <= tol or abs(est - est_prev) <= tol * max(est, 1e-300):
            return done(est, v)
        est_prev = est
    if best_cert <= 1e-4:
        return done(best_est, v)
    raise NonConvergence(
        f"power iteration did not stabilise to {tol:.1e} in {max_iter} steps "
        f"(best certified relative error {best_cert:.1e})"
    )


def matrix_spectral_norm(
    x: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 1000,
    rng: np.random.Generator | None = None,
) -> float:
    """Largest singular value of a (possibly rectangular) dense matrix.

    Runs the symmetric power iteration on v -> X^T (X v) and takes the square
    root of the dominant eigenvalue of the Gram matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch("expected a 2-D matrix")
    gram = sym_operator_norm(lambda v: x.T @ (x @ v), x.shape[1], tol, max_iter, rng)
    return float(np.sqrt(gram))


def pairwise_dist(z: np.ndarray, squared: bool = False) -> np.ndarray:
    """Dense symmetric Euclidean (or squared) distance matrix with zero diagonal.

    Uses the inner-product expansion; tiny negative values from cancellation
    are clamped to zero before the square root.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeMismatch("expected a 2-D matrix of row vectors")
    sq = np.einsum("ij,ij->i", z, z)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (z @ z.T)
    np.maximum(d2, 0.0, out=d2)
    d2 = 0.5 * (d2 + d2.T)
    np.fill_diagonal(d2, 0.0)
    if squared:
        return d2
    return np.sqrt(d2)


def pca_reduce(
    x: np.ndarray,
    r: int,
    rng: np.random.Generator,
    oversample: int = 10,
    n_power_iter: int = 7,
) -> np.ndarray:
    """Scores on the top-r principal directions of mean-centred ``x``.

    Randomized subspace iteration: Gaussian sketch, a few re-orthogonalised
    power steps, then an exact SVD of the small projected matrix. Component
    variances come out in non-increasing order. Emits RankDeficientWarning
    (not an error) when fewer than r singular values are meaningfully
    nonzero.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if not 1 <= r <= min(n, d):
        raise ValueError(f"components r={r} must lie in [1, {min(n, d)}]")
    xc = x - x.mean(axis=0)

    ell = min(d, r + oversample)
    sketch = rng.standard_normal((d, ell))
    y = xc @ sketch
    q, _ = np.linalg.qr(y)
    for _ in range(n_power_iter):
        q, _ = np.linalg.qr(xc.T @ q)
        q, _ = np.linalg.qr(xc @ q)
    b = q.T @ xc
    ub, s, _ = np.linalg.svd(b, full_matrices=False)
    u = q @ ub

    rank_tol = (s[0] if s.size else 0.0) * max(n, d) * np.finfo(np.float64).eps
    effective_rank = int(np.sum(s > rank_tol))
    if effective_rank < r:
        warnings.warn(
            f"requested {r} components but data rank is ~{effective_rank}",
            RankDeficientWarning,
            stacklevel=2,
        )
    return u[:, :r] * s[:r]
