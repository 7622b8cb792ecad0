"""End-to-end orchestration: schedules, variants, feedback rounds, results.

A run alternates between rebuilding the sparse graph from the current
embeddings and training the encoder on that fixed graph, growing the
neighbourhood size on a linear schedule. The final embeddings, their graph
edges and the averaged edge weights feed the robust clustering stage.
Optional outer rounds feed the clustering back into the contrastive
negatives and re-cluster until assignments stop moving.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import graph as graphmod
from .config import PipelineConfig
from .contrastive import augment_gaussian, fuse_views, info_nce_debiased
from .encoder import EncoderParams, OptimizerState, encode, train_encoder
from .exceptions import ConfigError, MissingClusterCount
from .metrics import adjusted_mutual_info, adjusted_rand_index, contingency, kmeans_pp
from .numerics import pca_reduce
from .rcc import RccConfig, RccState, mutual_knn_graph, rcc_run, relabel_contiguous
from .rng import SeededRng


@dataclass
class RunResult:
    """Outcome of one pipeline run.

    ``ami``/``ari`` are on the [-1, 1] scale and present only when ground
    truth labels were supplied. The serialized document reports them in
    percentage scale; wall-clock timings are kept out of it by default so
    identical seeded runs serialize byte-identically.
    """

    assignments: np.ndarray
    n_clusters: int
    ami: float | None
    ari: float | None
    loss_trace: list[float]
    timings: dict[str, float]
    config: dict
    seed: int

    def to_document(self, include_timings: bool = False) -> dict:
        doc = {
            "assignments": [int(v) for v in self.assignments.tolist()],
            "n_clusters": int(self.n_clusters),
            "ami": None if self.ami is None else 100.0 * self.ami,
            "ari": None if self.ari is None else 100.0 * self.ari,
            "metrics_scale": "percent",
            "loss_trace": [float(v) for v in self.loss_trace],
            "config": self.config,
            "seed": int(self.seed),
        }
        if include_timings:
            doc["timings"] = {k: float(v) for k, v in self.timings.items()}
        return doc

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(
            self.to_document(include_timings), indent=2, sort_keys=True
        ) + "\n"


@dataclass
class PipelineArtifacts:
    """Internal state exposed for reporting and tests."""

    embeddings: np.ndarray | None = None
    representatives: np.ndarray | None = None
    row_graph: graphmod.SparseRowGraph | None = None
    sym_graph: graphmod.SymGraph | None = None
    rcc_state: RccState | None = None
    encoder_params: EncoderParams | None = None
    round_assignments: list[np.ndarray] = field(default_factory=list)
    switch_losses: list[tuple[float, float]] = field(default_factory=list)


def _graph_digest(p: graphmod.SparseRowGraph) -> str:
    h = hashlib.sha256()
    h.update(np.int64(p.k).tobytes())
    h.update(p.mat.indptr.astype(np.int64).tobytes())
    h.update(p.mat.indices.astype(np.int64).tobytes())
    h.update(p.mat.data.astype(np.float64).tobytes())
    return h.hexdigest()


def fraction_changed(old: np.ndarray, new: np.ndarray) -> float:
    """Share of samples whose cluster moved, after greedily aligning the
    new labels to the old ones by maximum overlap."""
    old = relabel_contiguous(old)
    new = relabel_contiguous(new)
    table = contingency(new, old).counts
    order = np.argsort(table, axis=None)[::-1]
    mapping: dict[int, int] = {}
    used_old: set[int] = set()
    for flat in order.tolist():
        ni, oi = divmod(flat, table.shape[1])
        if table[ni, oi] == 0:
            break
        if ni in mapping or oi in used_old:
            continue
        mapping[ni] = oi
        used_old.add(oi)
    aligned = np.array([mapping.get(int(v), -1) for v in new.tolist()])
    return float(np.mean(aligned != old))


def run_asrc(
    x: np.ndarray, cfg: PipelineConfig, labels: np.ndarray | None = None
) -> RunResult:
    """Full pipeline on a feature matrix; see run_with_artifacts."""
    result, _ = run_with_artifacts(x, cfg, labels)
    return result


def run_variant(
    x: np.ndarray, cfg: PipelineConfig, labels: np.ndarray | None = None
) -> RunResult:
    """Dispatch on cfg.variant (asrc, asrc1, asrc2, adagae, rcc)."""
    result, _ = run_with_artifacts(x, cfg, labels)
    return result


def run_with_artifacts(
    x: np.ndarray, cfg: PipelineConfig, labels: np.ndarray | None = None
) -> tuple[RunResult, PipelineArtifacts]:
    cfg.validate()
    x = np.asarray(x, dtype=np.float64)
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape[0] != x.shape[0]:
            raise ConfigError(
                f"labels cover {labels.shape[0]} samples, data has {x.shape[0]}"
            )
    rng = SeededRng(cfg.seed)
    timings: dict[str, float] = {}
    t_total = time.perf_counter()

    t0 = time.perf_counter()
    from .data import normalize_minmax

    feats = normalize_minmax(x)
    if cfg.pca_components:
        r = cfg.pca_components
        if r > min(feats.shape):
            raise ConfigError(
                f"key 'pca_components': {r} exceeds min(n, d) = {min(feats.shape)}"
            )
        feats = pca_reduce(feats, r, rng.stream("pca"))
    timings["prepare"] = time.perf_counter() - t0

    if cfg.variant == "rcc":
        assignments, trace, artifacts = _run_rcc_variant(feats, cfg, rng, timings)
    else:
        assignments, trace, artifacts = _run_training_variant(feats, cfg, rng, timings)

    ami = ari = None
    if labels is not None:
        ami = adjusted_mutual_info(assignments, labels)
        ari = adjusted_rand_index(assignments, labels)
    timings["total"] = time.perf_counter() - t_total
    result = RunResult(
        assignments=assignments,
        n_clusters=int(assignments.max()) + 1,
        ami=ami,
        ari=ari,
        loss_trace=trace,
        timings=timings,
        config=cfg.to_dict(),
        seed=cfg.seed,
    )
    return result, artifacts


def _rcc_config(cfg: PipelineConfig) -> RccConfig:
    return RccConfig(
        max_sweeps=cfg.T3, update_interval=cfg.t, delta=cfg.delta
    )


def _run_rcc_variant(feats, cfg, rng, timings):
    t0 = time.perf_counter()
    ei, ej, w = mutual_knn_graph(feats, cfg.k0, cfg.metric)
    labels, state = rcc_run(feats, ei, ej, w, _rcc_config(cfg), rng.stream("rcc"))
    timings["clustering"] = time.perf_counter() - t0
    artifacts = PipelineArtifacts(
        embeddings=feats,
        representatives=state.u,
        rcc_state=state,
        round_assignments=[labels],
    )
    return labels, [], artifacts


def _current_embeddings(x1, x2, a_hat, params):
    if x2 is None:
        return encode(x1, a_hat, params)
    return fuse_views(encode(x1, a_hat, params), encode(x2, a_hat, params))


def _run_training_variant(feats, cfg, rng, timings):
    n, d = feats.shape
    if cfg.k0 > n - 1:
        raise ConfigError(f"key 'k0': {cfg.k0} exceeds n-1 = {n - 1}")
    h1, h2 = cfg.hidden_sizes()
    single_view = cfg.variant == "adagae"
    beta = 0.0 if single_view else cfg.beta
    inner_rounds = 1 if cfg.variant in ("asrc1", "adagae") else cfg.T2
    resync = cfg.variant in ("asrc", "asrc2")
    feedback_rounds = cfg.R if cfg.variant == "asrc" else 1

    x1 = feats
    x2 = None if single_view else augment_gaussian(
        feats, cfg.noise_std, rng.stream("augment")
    )
    params = EncoderParams.init_glorot(d, h1, h2, rng.stream("init"))
    opt = OptimizerState(lr=cfg.eta)
    sched = graphmod.SparsitySchedule.start(cfg.k0, cfg.s, cfg.T1, n)

    artifacts = PipelineArtifacts(encoder_params=params)
    trace: list[float] = []
    z = feats
    p = None
    sym = None

    t0 = time.perf_counter()
    for _ in range(cfg.T1):
        p = graphmod.row_graph_from_embeddings(z, sched.k)
        sym = graphmod.symmetrize_normalize(p)
        for _ in range(inner_rounds):
            trace += train_encoder(
                x1, x2, sym.normalized, p, params, opt,
                lam2=cfg.lambda2, beta=beta, tau=cfg.tau,
                clusters=None, max_steps=cfg.inner_steps,
            )
            z = _current_embeddings(x1, x2, sym.normalized, params)
            if resync:
                p = graphmod.row_graph_from_embeddings(z, sched.k)
                sym = graphmod.symmetrize_normalize(p)
        sched = graphmod.advance_sparsity(sched)
    timings["graph_training"] = time.perf_counter() - t0
    assert p is not None and sym is not None
    k_used = p.k

    if resync:
        # The edges and weights handed to clustering must be exactly the
        # graph of the embeddings handed to clustering.
        rebuilt = graphmod.row_graph_from_embeddings(z, k_used)
        if _graph_digest(rebuilt) != _graph_digest(p):
            raise AssertionError("graph/embedding consistency violated")

    artifacts.embeddings = z
    artifacts.row_graph = p
    artifacts.sym_graph = sym

    if cfg.variant == "adagae":
        if cfg.n_clusters < 1:
            raise MissingClusterCount(
                "the adagae variant needs n_clusters in the config"
            )
        t0 = time.perf_counter()
        assignments = kmeans_pp(z, cfg.n_clusters, rng.stream("kmeans"))
        timings["clustering"] = time.perf_counter() - t0
        artifacts.round_assignments.append(assignments)
        return assignments, trace, artifacts

    rcc_gen = rng.stream("rcc")
    t0 = time.perf_counter()
    assignments, state = rcc_run(
        z, sym.rcc_edges_i, sym.rcc_edges_j, sym.rcc_edges_w,
        _rcc_config(cfg), rcc_gen,
    )
    timings["clustering"] = time.perf_counter() - t0
    artifacts.round_assignments.append(assignments)
    artifacts.rcc_state = state
    artifacts.representatives = state.u

    t0 = time.perf_counter()
    for _ in range(1, feedback_rounds):
        mask_labels = assignments
        z1 = encode(x1, sym.normalized, params)
        z2 = encode(x2, sym.normalized, params)
        artifacts.switch_losses.append(
            (
                info_nce_debiased(z1, z2, mask_labels, cfg.tau),
                info_nce_debiased(z1, z2, None, cfg.tau),
            )
        )
        trace += train_encoder(
            x1, x2, sym.normalized, p, params, opt,
            lam2=cfg.lambda2, beta=beta, tau=cfg.tau,
            clusters=mask_labels, max_steps=cfg.inner_steps,
        )
        z = _current_embeddings(x1, x2, sym.normalized, params)
        p = graphmod.row_graph_from_embeddings(z, k_used)
        sym = graphmod.symmetrize_normalize(p)
        new_assignments, state = rcc_run(
            z, sym.rcc_edges_i, sym.rcc_edges_j, sym.rcc_edges_w,
            _rcc_config(cfg), rcc_gen,
        )
        changed = fraction_changed(assignments, new_assignments)
        assignments = new_assignments
        artifacts.round_assignments.append(assignments)
        artifacts.rcc_state = state
        artifacts.representatives = state.u
        artifacts.embeddings = z
        artifacts.row_graph = p
        artifacts.sym_graph = sym
        if changed < 0.01:
            break
    timings["feedback"] = time.perf_counter() - t0
    return assignments, trace, artifacts
