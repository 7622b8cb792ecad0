"""Two-layer graph-convolutional encoder, distance-softmax decoder, the
combined training loss with exact analytic gradients, and the adaptive
moment optimizer.

The encoder is Z = A_hat relu(A_hat X W1) W2 with a shared parameter set
across both feature views. Reconstruction matches the learned connection
probabilities against a softmax over negative embedding distances; every
square root carries a small epsilon so gradients exist at coincident
points.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .contrastive import NORM_EPS, fuse_views, info_nce_debiased_with_grad
from .exceptions import NonFiniteLoss, ShapeMismatch
from .graph import SparseRowGraph


@dataclass
class EncoderParams:
    """Weight matrices of the two graph-convolution layers."""

    w1: np.ndarray
    w2: np.ndarray

    @property
    def architecture(self) -> str:
        return f"{self.w1.shape[0]}-{self.w1.shape[1]}-{self.w2.shape[1]}"

    @classmethod
    def init_glorot(
        cls, d: int, h1: int, h2: int, rng: np.random.Generator
    ) -> "EncoderParams":
        """Uniform on +-sqrt(6 / (fan_in + fan_out)) per layer."""
        b1 = np.sqrt(6.0 / (d + h1))
        b2 = np.sqrt(6.0 / (h1 + h2))
        return cls(
            w1=rng.uniform(-b1, b1, size=(d, h1)),
            w2=rng.uniform(-b2, b2, size=(h1, h2)),
        )


@dataclass
class ParamGrads:
    w1: np.ndarray
    w2: np.ndarray


@dataclass
class OptimizerState:
    """Adaptive-moment accumulators mirroring the parameter shapes."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_w1: np.ndarray | None = None
    v_w1: np.ndarray | None = None
    m_w2: np.ndarray | None = None
    v_w2: np.ndarray | None = None

    def _ensure(self, params: EncoderParams) -> None:
        if self.m_w1 is None:
            self.m_w1 = np.zeros_like(params.w1)
            self.v_w1 = np.zeros_like(params.w1)
            self.m_w2 = np.zeros_like(params.w2)
            self.v_w2 = np.zeros_like(params.w2)

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        np.savez(
            buf,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            step=self.step,
            m_w1=self.m_w1 if self.m_w1 is not None else np.array([]),
            v_w1=self.v_w1 if self.v_w1 is not None else np.array([]),
            m_w2=self.m_w2 if self.m_w2 is not None else np.array([]),
            v_w2=self.v_w2 if self.v_w2 is not None else np.array([]),
        )
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "OptimizerState":
        with np.load(io.BytesIO(blob)) as data:
            state = cls(
                lr=float(data["lr"]),
                beta1=float(data["beta1"]),
                beta2=float(data["beta2"]),
                eps=float(data["eps"]),
                step=int(data["step"]),
            )
            for name in ("m_w1", "v_w1", "m_w2", "v_w2"):
                arr = data[name]
                setattr(state, name, None if arr.size == 0 else arr)
        return state


def optimizer_step(
    params: EncoderParams, grads: ParamGrads, state: OptimizerState
) -> tuple[EncoderParams, OptimizerState]:
    """One adaptive-moment update; mutates ``params`` and ``state`` in place."""
    if grads.w1.shape != params.w1.shape or grads.w2.shape != params.w2.shape:
        raise ShapeMismatch("gradient shapes do not match parameter shapes")
    state._ensure(params)
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for w, g, m, v in (
        (params.w1, grads.w1, state.m_w1, state.v_w1),
        (params.w2, grads.w2, state.m_w2, state.v_w2),
    ):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        w -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def _forward(
    x: np.ndarray, a_hat: sparse.csr_array, params: EncoderParams
) -> tuple[np.ndarray, dict]:
    if x.shape[1] != params.w1.shape[0]:
        raise ShapeMismatch(
            f"features have {x.shape[1]} columns, first layer expects "
            f"{params.w1.shape[0]}"
        )
    if a_hat.shape[0] != x.shape[0]:
        raise ShapeMismatch("graph size does not match the number of samples")
    ax = a_hat @ x
    h_pre = ax @ params.w1
    h = np.maximum(h_pre, 0.0)
    ah = a_hat @ h
    z = ah @ params.w2
    return z, {"ax": ax, "h_pre": h_pre, "ah": ah}


def _backward(
    cache: dict, a_hat: sparse.csr_array, dz: np.ndarray, params: EncoderParams
) -> ParamGrads:
    dw2 = cache["ah"].T @ dz
    dh = a_hat @ (dz @ params.w2.T)
    dh_pre = dh * (cache["h_pre"] > 0.0)
    dw1 = cache["ax"].T @ dh_pre
    return ParamGrads(w1=dw1, w2=dw2)


def encode(
    x: np.ndarray, a_hat: sparse.csr_array, params: EncoderParams
) -> np.ndarray:
    """Embeddings of the node features under the normalized graph operator."""
    z, _ = _forward(np.asarray(x, dtype=np.float64), a_hat, params)
    return z


def smoothed_pairwise_dist(z: np.ndarray) -> np.ndarray:
    """Euclidean distances with NORM_EPS inside the square root.

    The diagonal is sqrt(NORM_EPS) rather than zero; that keeps every
    distance differentiable and is absorbed by the softmax decoder.
    """
    z = np.asarray(z, dtype=np.float64)
    sq = np.einsum("ij,ij->i", z, z)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (z @ z.T)
    np.maximum(d2, 0.0, out=d2)
    d2 = 0.5 * (d2 + d2.T)
    return np.sqrt(d2 + NORM_EPS)


def decode_distribution(z: np.ndarray) -> np.ndarray:
    """Row-stochastic reconstruction: softmax over negative distances.

    The self term is part of every denominator, so each row is strictly
    positive and sums to one.
    """
    d = smoothed_pairwise_dist(z)
    e = np.exp(-d)
    return e / e.sum(axis=1, keepdims=True)


def gae_loss(p: SparseRowGraph, z: np.ndarray, lam2: float) -> float:
    """Row-wise KL between learned and reconstructed connection
    probabilities, plus the weighted embedding-distance penalty."""
    loss, _ = _gae_loss_and_grad_z(p, np.asarray(z, dtype=np.float64), lam2, need_grad=False)
    return loss


def _gae_loss_and_grad_z(
    p: SparseRowGraph, z: np.ndarray, lam2: float, need_grad: bool = True
) -> tuple[float, np.ndarray | None]:
    n = z.shape[0]
    if p.n != n:
        raise ShapeMismatch("graph and embeddings disagree on sample count")
    d = smoothed_pairwise_dist(z)
    # Row max of -d is at the self entry, about zero: the plain sum-exp is
    # already stable.
    e = np.exp(-d)
    row_sum = e.sum(axis=1)
    log_row_sum = np.log(row_sum)

    pm = p.mat
    rows = np.repeat(np.arange(n), np.diff(pm.indptr))
    cols = pm.indices
    vals = pm.data
    d_support = d[rows, cols]
    # log p_hat at the support: -d - log(sum exp(-d)).
    log_phat = -d_support - log_row_sum[rows]
    kl = float(np.sum(vals * (np.log(vals) - log_phat)))
    dist_term = float(0.5 * lam2 * np.sum(vals * d_support))
    loss = kl + dist_term

    if not need_grad:
        return loss, None

    # d/dd of the loss: (1 + lam2/2) p_ij - sigma_i p_hat_ij, with sigma_i
    # the actual row sums of p (exactness does not assume they equal one).
    sigma = np.zeros(n)
    np.add.at(sigma, rows, vals)
    g = -(sigma[:, None] * (e / row_sum[:, None]))
    g[rows, cols] += (1.0 + 0.5 * lam2) * vals
    w = g + g.T
    m = w / d
    np.fill_diagonal(m, 0.0)
    dz = m.sum(axis=1)[:, None] * z - m @ z
    return loss, dz


@dataclass
class EmbeddingViews:
    """Per-view embeddings and their linear fusion."""

    z1: np.ndarray
    z2: np.ndarray
    fused: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.fused = fuse_views(self.z1, self.z2)


def asrc_loss_and_grad(
    x1: np.ndarray,
    x2: np.ndarray,
    a_hat: sparse.csr_array,
    params: EncoderParams,
    p: SparseRowGraph,
    lam2: float,
    beta: float,
    tau: float = 1.0,
    clusters: np.ndarray | None = None,
) -> tuple[float, ParamGrads, EmbeddingViews]:
    """Training objective and its exact gradient through both views.

    The reconstruction branch reads the fused embedding; the contrastive
    branch compares the two views directly, with negatives restricted to
    out-of-cluster samples when ``clusters`` is given.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise ShapeMismatch(f"view shapes differ: {x1.shape} vs {x2.shape}")
    z1, cache1 = _forward(x1, a_hat, params)
    z2, cache2 = _forward(x2, a_hat, params)
    if not (np.all(np.isfinite(z1)) and np.all(np.isfinite(z2))):
        raise NonFiniteLoss("embeddings are not finite (divergent training)")
    views = EmbeddingViews(z1=z1, z2=z2)

    recon_loss, d_fused = _gae_loss_and_grad_z(p, views.fused, lam2)
    dz1 = 0.5 * d_fused
    dz2 = 0.5 * d_fused
    loss = recon_loss
    if beta != 0.0:
        ssl_loss, g1, g2 = info_nce_debiased_with_grad(z1, z2, clusters, tau)
        loss += beta * ssl_loss
        dz1 = dz1 + beta * g1
        dz2 = dz2 + beta * g2

    if not np.isfinite(loss):
        raise NonFiniteLoss(f"training loss is {loss!r}")

    grads1 = _backward(cache1, a_hat, dz1, params)
    grads2 = _backward(cache2, a_hat, dz2, params)
    grads = ParamGrads(w1=grads1.w1 + grads2.w1, w2=grads1.w2 + grads2.w2)
    if not (np.all(np.isfinite(grads.w1)) and np.all(np.isfinite(grads.w2))):
        raise NonFiniteLoss("gradients are not finite")
    return loss, grads, views


def gae_only_loss_and_grad(
    x: np.ndarray,
    a_hat: sparse.csr_array,
    params: EncoderParams,
    p: SparseRowGraph,
    lam2: float,
) -> tuple[float, ParamGrads, np.ndarray]:
    """Single-view objective (no augmentation, no contrastive term)."""
    x = np.asarray(x, dtype=np.float64)
    z, cache = _forward(x, a_hat, params)
    if not np.all(np.isfinite(z)):
        raise NonFiniteLoss("embeddings are not finite (divergent training)")
    loss, dz = _gae_loss_and_grad_z(p, z, lam2)
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"training loss is {loss!r}")
    grads = _backward(cache, a_hat, dz, params)
    return loss, grads, z


def train_encoder(
    x1: np.ndarray,
    x2: np.ndarray | None,
    a_hat: sparse.csr_array,
    p: SparseRowGraph,
    params: EncoderParams,
    state: OptimizerState,
    lam2: float,
    beta: float,
    tau: float = 1.0,
    clusters: np.ndarray | None = None,
    max_steps: int = 100,
    rel_tol: float = 1e-4,
    patience: int = 5,
) -> list[float]:
    """Gradient steps on one fixed graph until the loss plateaus.

    Stops early when the relative loss change stays below ``rel_tol`` for
    ``patience`` consecutive steps. Returns the per-step loss trace.
    """
    trace: list[float] = []
    stable = 0
    prev = None
    for _ in range(max_steps):
        if x2 is None:
            loss, grads, _ = gae_only_loss_and_grad(x1, a_hat, params, p, lam2)
        else:
            loss, grads, _ = asrc_loss_and_grad(
                x1, x2, a_hat, params, p, lam2, beta, tau, clusters
            )
        optimizer_step(params, grads, state)
        trace.append(loss)
        if prev is not None:
            if abs(loss - prev) <= rel_tol * max(1.0, abs(prev)):
                stable += 1
                if stable >= patience:
                    break
            else:
                stable = 0
        prev = loss
    return trace
