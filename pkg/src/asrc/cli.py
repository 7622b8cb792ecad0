"""Command-line interface.

Exit codes: 0 on success, 2 on configuration or input errors, 3 on
numerical failures. The optional ASRC_THREADS environment variable caps
the BLAS thread pools (set it to 1 for bit-reproducible runs).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .config import PipelineConfig, parse_config
from .data import (
    FORMATS,
    gen_blobs,
    gen_two_moons,
    load_labels,
    load_matrix,
    save_labels,
    save_matrix,
)
from .exceptions import (
    AsrcError,
    ConfigError,
    DimensionError,
    NumericalError,
    ParseError,
)
from .metrics import adjusted_mutual_info, adjusted_rand_index
from .pipeline import RunResult, run_with_artifacts

_CONFIG_EXIT = 2
_NUMERIC_EXIT = 3


def _limit_threads() -> None:
    raw = os.environ.get("ASRC_THREADS")
    if raw is None:
        return
    try:
        count = int(raw)
    except ValueError as exc:
        raise ConfigError(f"ASRC_THREADS must be an integer, got {raw!r}") from exc
    if count < 1:
        raise ConfigError(f"ASRC_THREADS must be positive, got {count}")
    import threadpoolctl

    threadpoolctl.threadpool_limits(count)


def _fail(exc: Exception, code: int) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            _limit_threads()
            return fn(*args, **kwargs)
        except (ConfigError, ParseError, DimensionError) as exc:
            _fail(exc, _CONFIG_EXIT)
        except NumericalError as exc:
            _fail(exc, _NUMERIC_EXIT)
        except AsrcError as exc:
            _fail(exc, _CONFIG_EXIT)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
def main() -> None:
    """Adaptive self-supervised robust clustering pipeline."""


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--variant", type=click.Choice(["asrc", "asrc1", "asrc2", "adagae", "rcc"]))
@click.option("--seed", type=int)
@click.option("--out", "out_path", type=click.Path(), default="result.json")
@click.option("--format", "fmt", type=click.Choice(list(FORMATS)), default="csv")
@click.option("--header", is_flag=True, help="Skip the first CSV line.")
@click.option("--assignments-out", type=click.Path(),
              help="Also write the assignment as a labels file.")
@click.option("--report-dir", type=click.Path(),
              help="Render figures and CSV summaries into this directory.")
@click.option("--timings", is_flag=True,
              help="Include wall-clock timings in the result document "
                   "(breaks byte-for-byte reproducibility).")
@_guarded
def run(data_path, labels_path, config_path, variant, seed, out_path, fmt,
        header, assignments_out, report_dir, timings) -> None:
    """Cluster a feature matrix and write the result document."""
    cfg = parse_config(config_path)
    if variant is not None:
        cfg.variant = variant
    if seed is not None:
        cfg.seed = seed
    cfg.validate()
    x = load_matrix(data_path, fmt=fmt, has_header=header)
    labels = load_labels(labels_path) if labels_path else None
    result, artifacts = run_with_artifacts(x, cfg, labels)

    Path(out_path).write_text(result.to_json(include_timings=timings),
                              encoding="utf-8")
    if assignments_out:
        save_labels(result.assignments, assignments_out)
    if report_dir:
        from .report import render_report

        render_report(result, report_dir, artifacts=artifacts, data=x)
    _echo_summary(result)


def _echo_summary(result: RunResult) -> None:
    click.echo(f"clusters: {result.n_clusters}", err=True)
    if result.ami is not None:
        click.echo(f"AMI: {100.0 * result.ami:.2f}", err=True)
    if result.ari is not None:
        click.echo(f"ARI: {100.0 * result.ari:.2f}", err=True)
    total = result.timings.get("total")
    if total is not None:
        click.echo(f"wall time: {total:.2f}s", err=True)


@main.command()
@click.argument("kind", type=click.Choice(["moons", "blobs"]))
@click.option("--n", type=int, default=300, show_default=True)
@click.option("--noise", type=float, default=0.05, show_default=True,
              help="Moons: noise standard deviation.")
@click.option("--clusters", type=int, default=4, show_default=True,
              help="Blobs: number of blobs.")
@click.option("--separation", type=float, default=10.0, show_default=True,
              help="Blobs: minimum centre distance.")
@click.option("--spread", type=float, default=1.0, show_default=True,
              help="Blobs: per-coordinate standard deviation.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--labels-out", type=click.Path())
@click.option("--format", "fmt", type=click.Choice(list(FORMATS)), default="csv")
@_guarded
def synth(kind, n, noise, clusters, separation, spread, seed, out_path,
          labels_out, fmt) -> None:
    """Generate a synthetic dataset (and optionally its labels)."""
    if kind == "moons":
        x, labels = gen_two_moons(n, noise, seed)
    else:
        x, labels = gen_blobs(n, clusters, separation, spread, seed)
    save_matrix(x, out_path, fmt=fmt)
    if labels_out:
        save_labels(labels, labels_out)
    click.echo(f"wrote {x.shape[0]}x{x.shape[1]} {kind} to {out_path}", err=True)


@main.command()
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@_guarded
def eval(pred_path, labels_path) -> None:
    """Score a predicted assignment against ground truth labels."""
    pred = load_labels(pred_path)
    truth = load_labels(labels_path)
    ami = adjusted_mutual_info(pred, truth)
    ari = adjusted_rand_index(pred, truth)
    click.echo(f"AMI: {100.0 * ami:.2f}")
    click.echo(f"ARI: {100.0 * ari:.2f}")


@main.command()
@click.option("--result", "result_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--data", "data_path", type=click.Path(exists=True),
              help="Optional feature matrix for the 2-D scatter figure.")
@click.option("--format", "fmt", type=click.Choice(list(FORMATS)), default="csv")
@click.option("--header", is_flag=True)
@_guarded
def report(result_path, out_dir, data_path, fmt, header) -> None:
    """Re-render figures and CSV summaries from a saved result document."""
    doc = json.loads(Path(result_path).read_text(encoding="utf-8"))
    scale = 0.01 if doc.get("metrics_scale") == "percent" else 1.0
    result = RunResult(
        assignments=np.asarray(doc["assignments"], dtype=np.int64),
        n_clusters=int(doc["n_clusters"]),
        ami=None if doc.get("ami") is None else scale * doc["ami"],
        ari=None if doc.get("ari") is None else scale * doc["ari"],
        loss_trace=list(doc.get("loss_trace", [])),
        timings=dict(doc.get("timings", {})),
        config=dict(doc.get("config", {})),
        seed=int(doc.get("seed", 0)),
    )
    data = load_matrix(data_path, fmt=fmt, has_header=header) if data_path else None
    from .report import render_report

    paths = render_report(result, out_dir, data=data)
    for path in paths:
        click.echo(str(path), err=True)


if __name__ == "__main__":
    main()
