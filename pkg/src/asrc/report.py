"""Report rendering: matplotlib figures plus delimited summaries.

Given a run result (and optionally the internal artifacts), writes PNG
figures and CSV files side by side into a directory: the training loss
trace, the cluster size profile, a 2-D view of the clustered points, the
per-sample assignments and a small metrics table.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import PipelineArtifacts, RunResult


def _two_dim_view(points: np.ndarray) -> np.ndarray:
    """Project to 2-D with a plain centred SVD when needed."""
    if points.shape[1] == 2:
        return points
    if points.shape[1] == 1:
        return np.column_stack([points[:, 0], np.zeros(points.shape[0])])
    centred = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    return centred @ vt[:2].T


def write_assignments_csv(assignments: np.ndarray, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("sample,cluster\n")
        for idx, lab in enumerate(np.asarray(assignments).tolist()):
            fh.write(f"{idx},{int(lab)}\n")


def write_metrics_csv(result: RunResult, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("metric,value\n")
        fh.write(f"n_clusters,{result.n_clusters}\n")
        fh.write(f"seed,{result.seed}\n")
        if result.ami is not None:
            fh.write(f"ami_pct,{100.0 * result.ami:.4f}\n")
        if result.ari is not None:
            fh.write(f"ari_pct,{100.0 * result.ari:.4f}\n")
        for phase, secs in result.timings.items():
            fh.write(f"time_{phase}_s,{secs:.3f}\n")


def plot_loss_trace(trace: list[float], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(np.arange(1, len(trace) + 1), trace, lw=1.0)
    ax.set_xlabel("gradient step")
    ax.set_ylabel("training loss")
    ax.set_title("Training loss trace")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cluster_sizes(assignments: np.ndarray, path: Path) -> None:
    labels, counts = np.unique(np.asarray(assignments), return_counts=True)
    order = np.argsort(counts)[::-1]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(np.arange(labels.size), counts[order], color="tab:blue")
    ax.set_xlabel("cluster (sorted by size)")
    ax.set_ylabel("samples")
    ax.set_title(f"{labels.size} clusters")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_clusters_2d(
    points: np.ndarray, assignments: np.ndarray, path: Path, title: str
) -> None:
    view = _two_dim_view(np.asarray(points, dtype=np.float64))
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(
        view[:, 0], view[:, 1], c=np.asarray(assignments), s=12,
        cmap="tab20", linewidths=0,
    )
    ax.set_title(title)
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report(
    result: RunResult,
    out_dir: str | Path,
    artifacts: PipelineArtifacts | None = None,
    data: np.ndarray | None = None,
) -> list[Path]:
    """Write every figure and table the available inputs allow; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    path = out / "assignments.csv"
    write_assignments_csv(result.assignments, path)
    written.append(path)
    path = out / "metrics.csv"
    write_metrics_csv(result, path)
    written.append(path)

    if result.loss_trace:
        path = out / "loss_trace.png"
        plot_loss_trace(result.loss_trace, path)
        written.append(path)
    path = out / "cluster_sizes.png"
    plot_cluster_sizes(result.assignments, path)
    written.append(path)

    points = None
    title = ""
    if artifacts is not None and artifacts.representatives is not None:
        points, title = artifacts.representatives, "representatives"
    elif artifacts is not None and artifacts.embeddings is not None:
        points, title = artifacts.embeddings, "embeddings"
    elif data is not None:
        points, title = data, "input features"
    if points is not None:
        path = out / "clusters_2d.png"
        plot_clusters_2d(points, result.assignments, path, f"Clusters over {title}")
        written.append(path)

    if artifacts is not None and artifacts.embeddings is not None:
        path = out / "embedding_2d.png"
        plot_clusters_2d(
            artifacts.embeddings, result.assignments, path, "Clusters over embeddings"
        )
        written.append(path)
    return written
