"""Run configuration: one flat key-value file drives every command.

The file format is a minimal TOML-like dialect: one ``key = value`` pair
per line, ``#`` comments, blank lines allowed. Values are JSON scalars
(quoted strings, integers, floats, ``true``/``false``); unquoted values
are taken as bare strings so paths read naturally. Unknown keys are
rejected. The effective config (all defaults resolved) can be written
back out and reloaded to reproduce a run exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError, NumericError
from .losses import LossConfig
from .prototypes import SimilarityConfig
from .trainer import TrainConfig

_KEY_RE = re.compile(r"^[a-z][a-z0-9_]*$")

# key -> value kind, used both to coerce parsed values and to format them.
_SCHEMA = {
    "train_path": "opt_str",
    "val_path": "opt_str",
    "test_path": "opt_str",
    "data_format": "str",
    "num_classes": "opt_int",
    "embedding_source": "str",
    "cache_path": "opt_str",
    "hash_dim": "int",
    "hash_seed": "int",
    "metric": "str",
    "psi": "float",
    "gamma": "float",
    "sparse": "bool",
    "alpha": "float",
    "beta": "float",
    "delta": "float",
    "eta": "float",
    "epochs": "int",
    "batch_size": "int",
    "projection_period": "int",
    "num_prototypes": "int",
    "seed": "int",
    "patience": "int",
    "validation_fraction": "float",
    "lr": "float",
    "hidden_size": "int",
    "num_layers": "int",
    "dropout": "float",
    "positive_class": "int",
    "proto_sample": "int",
    "cluster_cap": "int",
    "kmedoids_max_iter": "int",
    "out_dir": "str",
}


@dataclass
class RunConfig:
    train_path: str | None = None
    val_path: str | None = None
    test_path: str | None = None
    data_format: str = "jsonl"
    num_classes: int | None = None
    embedding_source: str = "hash"
    cache_path: str | None = None
    hash_dim: int = 64
    hash_seed: int = 0
    metric: str = "euclidean"
    psi: float = 1.0
    gamma: float = 1e6
    sparse: bool = True
    alpha: float = 0.1
    beta: float = 1e-4
    delta: float = 0.5
    eta: float = 1.0
    epochs: int = 50
    batch_size: int = 16
    projection_period: int = 10
    num_prototypes: int = 200
    seed: int = 0
    patience: int = 10
    validation_fraction: float = 0.1
    lr: float = 1e-4
    hidden_size: int = 128
    num_layers: int = 2
    dropout: float = 0.5
    positive_class: int = 1
    proto_sample: int = 512
    cluster_cap: int = 20000
    kmedoids_max_iter: int = 50
    out_dir: str = "runs"

    def sim_config(self) -> SimilarityConfig:
        return _as_config(
            SimilarityConfig, metric=self.metric, psi=self.psi, gamma=self.gamma, sparse=self.sparse
        )

    def loss_config(self) -> LossConfig:
        return _as_config(
            LossConfig, alpha=self.alpha, beta=self.beta, delta=self.delta, eta=self.eta
        )

    def train_config(self) -> TrainConfig:
        return _as_config(
            TrainConfig,
            epochs=self.epochs,
            batch_size=self.batch_size,
            projection_period=self.projection_period,
            num_prototypes=self.num_prototypes,
            seed=self.seed,
            patience=self.patience,
            validation_fraction=self.validation_fraction,
            lr=self.lr,
            hidden_size=self.hidden_size,
            num_layers=self.num_layers,
            dropout=self.dropout,
            positive_class=self.positive_class,
            proto_sample=self.proto_sample,
            cluster_cap=self.cluster_cap,
            kmedoids_max_iter=self.kmedoids_max_iter,
        )


def _as_config(cls, **kwargs):
    try:
        return cls(**kwargs)
    except NumericError as exc:
        raise ConfigError(str(exc)) from exc


def _coerce(key: str, value, kind: str):
    if kind == "opt_str":
        if value is None or isinstance(value, str):
            return value
    elif kind == "opt_int":
        if value is None:
            return value
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind == "str":
        if isinstance(value, str):
            return value
    elif kind == "bool":
        if isinstance(value, bool):
            return value
    elif kind == "int":
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind == "float":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    raise ConfigError(f"key {key!r} expects a {kind} value, got {value!r}")


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # bare string, e.g. an unquoted path


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, _parse_value(raw.strip()), _SCHEMA[key])
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return json.dumps(value)


def dump_config(cfg: RunConfig) -> str:
    """Render the effective config; parse_config(dump_config(c)) == c."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")
