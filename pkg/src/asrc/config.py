"""Pipeline configuration: defaults, named presets, and the key=value parser.

Unknown keys are hard errors: a silently ignored typo in a hyperparameter
name would invalidate any reproduction claim.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .exceptions import ConfigError

VARIANTS = ("asrc", "asrc1", "asrc2", "adagae", "rcc")
METRICS = ("euclidean", "cosine")

# Named hyperparameter presets for the benchmark collections.
PRESETS: dict[str, dict] = {
    "20news": dict(k0=50, s=150, lambda2=2.0**-3, T1=7, beta=1e-3,
                   struct="d-256-64", T2=2, pca_components=500),
    "umist": dict(k0=5, s=8, lambda2=4.0, T1=7, beta=10.0,
                  struct="d-256-64", T2=2),
    "coil20": dict(k0=5, s=8, lambda2=8.0, T1=10, beta=1.0,
                   struct="d-256-64", T2=1),
    "mnist": dict(k0=10, s=64, lambda2=2.0**-6, T1=15, beta=1e-3,
                  struct="d-256-64", T2=2),
    "jaffe": dict(k0=15, s=2, lambda2=2.0**-6, T1=10, beta=1.0,
                  struct="d-256-64", T2=4),
    "mice_protein": dict(k0=10, s=2, lambda2=2.0**-6, T1=20, beta=1.0,
                         struct="d-256-64", T2=2),
    "usps": dict(k0=10, s=50, lambda2=4.0, T1=7, beta=10.0,
                 struct="d-128-64", T2=2),
}

_INT_KEYS = {"k0", "s", "T1", "T2", "T3", "t", "R", "inner_steps",
             "pca_components", "seed", "n_clusters"}
_FLOAT_KEYS = {"lambda2", "beta", "tau", "noise_std", "eta", "delta"}
_STR_KEYS = {"variant", "metric", "struct"}


@dataclass
class PipelineConfig:
    """Everything a pipeline run needs besides the data itself."""

    # graph schedule
    k0: int = 10
    s: int = 2
    T1: int = 10
    T2: int = 2
    # training
    lambda2: float = 2.0**-6
    beta: float = 1.0
    tau: float = 1.0
    noise_std: float = 0.01
    eta: float = 1e-3
    inner_steps: int = 100
    struct: str = "d-256-64"
    # clustering
    T3: int = 100
    t: int = 4
    delta: float = 0.0
    # preprocessing / variants / orchestration
    pca_components: int = 0
    metric: str = "euclidean"
    variant: str = "asrc"
    R: int = 2
    seed: int = 0
    n_clusters: int = 0
    preset: str = field(default="", repr=False)

    def hidden_sizes(self) -> tuple[int, int]:
        parts = self.struct.split("-")
        if len(parts) != 3 or parts[0] != "d":
            raise ConfigError(
                f"key 'struct': expected the form d-<h1>-<h2>, got {self.struct!r}"
            )
        try:
            h1, h2 = int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"key 'struct': {exc}") from exc
        if h1 < 1 or h2 < 1:
            raise ConfigError("key 'struct': hidden sizes must be positive")
        return h1, h2

    def validate(self) -> "PipelineConfig":
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"key 'variant': {self.variant!r} not in {list(VARIANTS)}"
            )
        if self.metric not in METRICS:
            raise ConfigError(f"key 'metric': {self.metric!r} not in {list(METRICS)}")
        if self.k0 < 2:
            raise ConfigError("key 'k0': must be at least 2")
        if self.s < 0:
            raise ConfigError("key 's': must be nonnegative")
        for name in ("T1", "T2", "T3", "t", "R", "inner_steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"key '{name}': must be at least 1")
        if self.variant in ("asrc", "asrc1", "asrc2", "adagae"):
            if self.lambda2 <= 0:
                raise ConfigError("key 'lambda2': must be positive")
            if self.eta <= 0:
                raise ConfigError("key 'eta': must be positive")
        if self.variant in ("asrc", "asrc1", "asrc2") and self.beta <= 0:
            raise ConfigError("key 'beta': must be positive for contrastive variants")
        if self.tau <= 0:
            raise ConfigError("key 'tau': must be positive")
        if self.noise_std < 0:
            raise ConfigError("key 'noise_std': must be nonnegative")
        if self.delta < 0:
            raise ConfigError("key 'delta': must be nonnegative (0 = auto)")
        if self.pca_components < 0:
            raise ConfigError("key 'pca_components': must be nonnegative (0 = off)")
        if self.n_clusters < 0:
            raise ConfigError("key 'n_clusters': must be nonnegative")
        self.hidden_sizes()
        return self

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "preset"}
        if self.preset:
            out["preset"] = self.preset
        return out


def config_from_mapping(mapping: dict[str, str]) -> PipelineConfig:
    """Build a config from string key/value pairs, expanding any preset."""
    cfg = PipelineConfig()
    preset = mapping.get("preset", "")
    if preset:
        if preset not in PRESETS:
            raise ConfigError(
                f"key 'preset': unknown preset {preset!r}; "
                f"choose from {sorted(PRESETS)}"
            )
        for key, value in PRESETS[preset].items():
            setattr(cfg, key, value)
        cfg.preset = preset
    for key, raw in mapping.items():
        if key == "preset":
            continue
        if key in _INT_KEYS:
            try:
                setattr(cfg, key, int(raw, 10))
            except ValueError as exc:
                raise ConfigError(f"key {key!r}: expected an integer, got {raw!r}") from exc
        elif key in _FLOAT_KEYS:
            try:
                setattr(cfg, key, float(raw))
            except ValueError as exc:
                raise ConfigError(f"key {key!r}: expected a number, got {raw!r}") from exc
        elif key in _STR_KEYS:
            setattr(cfg, key, raw)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return cfg.validate()


def parse_config(path: str | Path) -> PipelineConfig:
    """Read a flat key=value file (blank lines and # comments allowed)."""
    mapping: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key in mapping:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        mapping[key] = value
    return config_from_mapping(mapping)
