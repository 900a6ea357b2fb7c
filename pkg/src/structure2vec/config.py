"""Training configuration and its flat ``key = value`` file format.

Blank lines, ``#``/``;`` comments and ``[section]`` headers are allowed;
sections are only for readability and all keys share one namespace. Keys must
match :class:`TrainConfig` field names exactly; anything else is an error.
Precedence: built-in defaults < config file < command-line overrides.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .embed import EngineKind


SELECT_METRICS = ("auto", "auc", "accuracy", "loss", "mae", "rmse")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    engine: str = "mean_field"
    d: int = 16
    b: int = 32
    T: int = 3
    head_depth: int = 2
    bias: bool = False
    lr0: float = 0.01
    lr_schedule: str = "step"
    lr_decay: float = 0.5
    lr_decay_every: int = 25
    batch_size: int = 16
    epochs: int = 200
    seed: int = 0
    early_stop_patience: Optional[int] = None
    val_fraction: float = 0.1
    resample_edges: tuple = ()
    resample_weights: tuple = ()
    grad_clip: Optional[float] = None
    task: str = "auto"
    trbp_weights: str = "ones"
    select_metric: str = "auto"
    workers: int = 1

    def __post_init__(self):
        try:
            self.engine = EngineKind.parse(self.engine).value
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            (self.d >= 1, "d must be >= 1"),
            (self.b >= 1, "b must be >= 1"),
            (self.T >= 1, "T must be >= 1"),
            (self.head_depth in (1, 2), "head_depth must be 1 or 2"),
            (self.lr0 >= 0 and math.isfinite(self.lr0), "lr0 must be a finite non-negative number"),
            (self.lr_schedule in ("constant", "step"), "lr_schedule must be 'constant' or 'step'"),
            (0 < self.lr_decay <= 1, "lr_decay must lie in (0, 1]"),
            (self.lr_decay_every >= 1, "lr_decay_every must be >= 1"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.early_stop_patience is None or self.early_stop_patience >= 0, "early_stop_patience must be >= 0"),
            (0 <= self.val_fraction < 1, "val_fraction must lie in [0, 1)"),
            (self.grad_clip is None or self.grad_clip > 0, "grad_clip must be positive"),
            (self.task in ("auto", "classification", "regression"), "task must be auto, classification or regression"),
            (self.trbp_weights in ("ones", "spanning_tree"), "trbp_weights must be 'ones' or 'spanning_tree'"),
            (self.select_metric in SELECT_METRICS, f"select_metric must be one of {', '.join(SELECT_METRICS)}"),
            (self.workers >= 1, "workers must be >= 1"),
            (list(self.resample_edges) == sorted(self.resample_edges), "resample_edges must be sorted"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if self.resample_edges or self.resample_weights:
            if len(self.resample_weights) != len(self.resample_edges) + 1:
                raise ConfigError("resample_weights needs one more entry than resample_edges")

    @property
    def engine_kind(self) -> EngineKind:
        return EngineKind.parse(self.engine)

    @property
    def resample(self) -> bool:
        return bool(self.resample_weights)

    def lr_at(self, epoch: int) -> float:
        """Step size for a 1-based epoch."""
        if self.lr_schedule == "constant":
            return self.lr0
        return self.lr0 * self.lr_decay ** ((epoch - 1) // self.lr_decay_every)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(float(x)) for x in v)
            elif v is None:
                v = "none"
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(TrainConfig)}


def _coerce(name: str, raw: str):
    f = _FIELDS[name]
    ann = str(f.type)
    raw = raw.strip()
    try:
        if ann.startswith("Optional"):
            if raw.lower() in ("none", "null", ""):
                return None
            ann = ann[len("Optional["):-1]
        if ann == "int":
            return int(raw)
        if ann == "float":
            return float(raw)
        if ann == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if ann == "tuple":
            return tuple(float(x) for x in raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    values: dict[str, object] = {}
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].split(";", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}; valid keys: {', '.join(_FIELDS)}")
        values[key] = _coerce(key, raw)
    return values


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> TrainConfig:
    merged = dict(file_values or {})
    for key, raw in (overrides or {}).items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}; valid keys: {', '.join(_FIELDS)}")
        merged[key] = _coerce(key, raw) if isinstance(raw, str) else raw
    return TrainConfig(**merged)


def load_config(path=None, overrides: dict | None = None) -> TrainConfig:
    file_values = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        file_values = parse_config_text(text, str(p))
    return build_config(file_values, overrides)
