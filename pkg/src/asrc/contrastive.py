"""View augmentation, view fusion, and the debiased contrastive loss.

The loss treats each sample's two views as the positive pair and, for
every anchor, draws negatives from both views of the samples outside the
anchor's current cluster. With no clustering yet (singleton clusters) it
reduces to plain InfoNCE over all other samples.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeMismatch

# Added inside every square root so norms stay differentiable at zero.
NORM_EPS = 1e-12


def augment_gaussian(
    x: np.ndarray, noise_std: float, rng: np.random.Generator
) -> np.ndarray:
    """Second view of the features: independent Gaussian noise per entry."""
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if noise_std == 0.0:
        return x.copy()
    return x + noise_std * rng.standard_normal(x.shape)


def fuse_views(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Entrywise arithmetic mean of the two view embeddings."""
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if z1.shape != z2.shape:
        raise ShapeMismatch(f"view shapes differ: {z1.shape} vs {z2.shape}")
    return 0.5 * (z1 + z2)


def negative_mask(labels: np.ndarray | None, n: int) -> np.ndarray:
    """Boolean matrix: mask[i, j] is True when j is a valid negative for i.

    ``labels=None`` means singleton clusters, i.e. everyone but the anchor
    itself is a negative.
    """
    if labels is None:
        mask = ~np.eye(n, dtype=bool)
    else:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ShapeMismatch(f"labels must have shape ({n},)")
        mask = labels[:, None] != labels[None, :]
    return mask


def _normalize_rows(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.sqrt(np.einsum("ij,ij->i", z, z) + NORM_EPS)
    return z / norms[:, None], norms


def info_nce_debiased(
    z1: np.ndarray,
    z2: np.ndarray,
    labels: np.ndarray | None = None,
    tau: float = 1.0,
) -> float:
    """Debiased InfoNCE over both view directions, averaged over 2n anchors."""
    loss, _, _ = info_nce_debiased_with_grad(z1, z2, labels, tau, need_grad=False)
    return loss


def info_nce_debiased_with_grad(
    z1: np.ndarray,
    z2: np.ndarray,
    labels: np.ndarray | None = None,
    tau: float = 1.0,
    need_grad: bool = True,
) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    """Loss plus exact reverse-mode gradients with respect to both views.

    Cosine similarities use the eps-smoothed row norms, so the gradient is
    defined everywhere, including at zero rows.
    """
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if z1.shape != z2.shape:
        raise ShapeMismatch(f"view shapes differ: {z1.shape} vs {z2.shape}")
    if tau <= 0:
        raise ValueError("temperature tau must be positive")
    n = z1.shape[0]
    mask = negative_mask(labels, n)

    a, norm1 = _normalize_rows(z1)
    b, norm2 = _normalize_rows(z2)
    s_ab = a @ b.T
    s_aa = a @ a.T
    s_bb = b @ b.T
    e_ab = np.exp(s_ab / tau)
    e_aa = np.exp(s_aa / tau)
    e_bb = np.exp(s_bb / tau)
    pos = np.diag(e_ab).copy()

    # Anchor in view 1 pairs with view 2 and vice versa; negatives come
    # from both views of each out-of-cluster sample.
    den1 = pos + ((e_aa + e_ab) * mask).sum(axis=1)
    den2 = pos + ((e_bb + e_ab.T) * mask).sum(axis=1)
    # log(den) - log(pos) rather than den/pos keeps the no-negatives case
    # exactly zero.
    loss = float(np.sum(np.log(den1) - np.log(pos)) + np.sum(np.log(den2) - np.log(pos)))
    loss /= 2.0 * n

    if not need_grad:
        return loss, None, None

    inv = 1.0 / (2.0 * n * tau)
    coef1 = inv / den1
    coef2 = inv / den2
    g_aa = mask * e_aa * coef1[:, None]
    g_bb = mask * e_bb * coef2[:, None]
    g_ab = mask * e_ab * coef1[:, None] + mask * e_ab * coef2[None, :]
    diag_idx = np.arange(n)
    g_ab[diag_idx, diag_idx] += (pos * coef1 - inv) + (pos * coef2 - inv)

    da = g_ab @ b + (g_aa + g_aa.T) @ a
    db = g_ab.T @ a + (g_bb + g_bb.T) @ b

    # Through the row normalisation: d/dz of z/r is (I - zz^T/r^2)/r.
    dz1 = (da - a * np.einsum("ij,ij->i", a, da)[:, None]) / norm1[:, None]
    dz2 = (db - b * np.einsum("ij,ij->i", b, db)[:, None]) / norm2[:, None]
    return loss, dz1, dz2
