"""Matrix and label file IO, min-max normalization, and synthetic datasets.

Two matrix formats: plain CSV (optional single header line) and a compact
raw binary layout -- a 16-byte header of two little-endian unsigned 64-bit
integers (rows, cols) followed by row-major little-endian IEEE doubles.
Labels files carry one integer per line.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .exceptions import DimensionError, ParseError

_RAW_HEADER = struct.Struct("<QQ")

FORMATS = ("csv", "raw-f64")


def load_matrix(
    path: str | Path, fmt: str = "csv", has_header: bool = False
) -> np.ndarray:
    if fmt == "csv":
        return _load_csv(Path(path), has_header)
    if fmt == "raw-f64":
        return _load_raw(Path(path))
    raise ValueError(f"unknown format {fmt!r}")


def _load_csv(path: Path, has_header: bool) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1 and has_header:
                continue
            stripped = line.strip()
            if not stripped:
                continue
            cells = stripped.split(",")
            try:
                values = [float(cell) for cell in cells]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            if any(not np.isfinite(v) for v in values):
                raise ParseError(f"{path}: line {lineno}: non-finite value")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DimensionError(
                    f"{path}: line {lineno}: expected {width} columns, "
                    f"got {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise DimensionError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def _load_raw(path: Path) -> np.ndarray:
    blob = path.read_bytes()
    if len(blob) < _RAW_HEADER.size:
        raise ParseError(f"{path}: byte 0: truncated header")
    n, d = _RAW_HEADER.unpack_from(blob)
    expected = _RAW_HEADER.size + 8 * n * d
    if len(blob) != expected:
        raise ParseError(
            f"{path}: byte {len(blob)}: expected {expected} bytes for a "
            f"{n}x{d} matrix"
        )
    x = np.frombuffer(blob, dtype="<f8", offset=_RAW_HEADER.size).reshape(n, d)
    x = x.astype(np.float64)
    if not np.all(np.isfinite(x)):
        raise ParseError(f"{path}: payload contains non-finite values")
    return x


def save_matrix(x: np.ndarray, path: str | Path, fmt: str = "csv") -> None:
    x = np.asarray(x, dtype=np.float64)
    path = Path(path)
    if fmt == "csv":
        with path.open("w", encoding="utf-8") as fh:
            for row in x:
                fh.write(",".join(repr(v) for v in row.tolist()))
                fh.write("\n")
    elif fmt == "raw-f64":
        with path.open("wb") as fh:
            fh.write(_RAW_HEADER.pack(x.shape[0], x.shape[1]))
            fh.write(np.ascontiguousarray(x, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_labels(path: str | Path) -> np.ndarray:
    labels: list[int] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                labels.append(int(stripped))
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if not labels:
        raise DimensionError(f"{path}: no labels")
    return np.asarray(labels, dtype=np.int64)


def save_labels(labels: np.ndarray, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for value in np.asarray(labels).tolist():
            fh.write(f"{int(value)}\n")


def normalize_minmax(x: np.ndarray) -> np.ndarray:
    """Per-column affine map onto [0, 1]; constant columns map to 0."""
    x = np.asarray(x, dtype=np.float64)
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = (x - lo) / safe
    out[:, span == 0] = 0.0
    return out


def gen_two_moons(
    n: int, noise: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Two interleaved half circles with additive Gaussian noise."""
    if n < 4:
        raise ValueError("need at least 4 samples")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n_out = n // 2
    n_in = n - n_out
    t_out = np.linspace(0.0, np.pi, n_out)
    t_in = np.linspace(0.0, np.pi, n_in)
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)])
    x = np.vstack([outer, inner])
    labels = np.concatenate([np.zeros(n_out, dtype=np.int64),
                             np.ones(n_in, dtype=np.int64)])
    if noise > 0:
        x = x + noise * rng.standard_normal(x.shape)
    perm = rng.permutation(n)
    return x[perm], labels[perm]


def gen_blobs(
    n: int, c: int, separation: float, spread: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic 2-D Gaussian blobs around evenly spaced circle centres.

    The circle radius is chosen so the minimum centre distance equals
    ``separation`` exactly; ``spread`` is the per-coordinate deviation.
    """
    if n < 4:
        raise ValueError("need at least 4 samples")
    if c < 1:
        raise ValueError("need at least one blob")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if c == 1:
        centers = np.zeros((1, 2))
    else:
        radius = separation / (2.0 * np.sin(np.pi / c))
        angles = 2.0 * np.pi * np.arange(c) / c
        centers = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    counts = np.full(c, n // c, dtype=np.int64)
    counts[: n % c] += 1
    labels = np.repeat(np.arange(c, dtype=np.int64), counts)
    x = centers[labels] + spread * rng.standard_normal((n, 2))
    perm = rng.permutation(n)
    return x[perm], labels[perm]


def prepare_mice_protein(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and class labels from the public mice cortex CSV.

    The source file has a sample-id column, 77 protein expression columns,
    and trailing categorical columns ending in an 8-way class. Rows with
    any missing expression value are dropped, which leaves the standard 552
    complete samples.
    """
    path = Path(path)
    rows: list[list[float]] = []
    labels: list[str] = []
    with path.open("r", encoding="utf-8-sig") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if len(header) < 79:
            raise DimensionError(
                f"{path}: expected an id column, 77 features and a class column"
            )
        class_idx = len(header) - 1
        for lineno, line in enumerate(fh, start=2):
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(header):
                raise DimensionError(
                    f"{path}: line {lineno}: expected {len(header)} columns"
                )
            raw = cells[1:78]
            if any(cell.strip() == "" for cell in raw):
                continue
            try:
                rows.append([float(cell) for cell in raw])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            labels.append(cells[class_idx].strip())
    if not rows:
        raise DimensionError(f"{path}: no complete rows")
    seen: dict[str, int] = {}
    y = np.asarray([seen.setdefault(lab, len(seen)) for lab in labels], dtype=np.int64)
    return np.asarray(rows, dtype=np.float64), y
