"""Run configuration: ``key = value`` files with ``#`` comments.

Defaults: span width 10, top-span ratio 0.4, detection weight 0.2, 1200
hidden units, 100 epochs.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .scorer import ScoringSettings


@dataclass(frozen=True)
class TrainConfig:
    max_span_width: int = 10
    top_span_ratio: float = 0.4
    detect_weight: float = 0.2
    epochs: int = 100
    pretrain_epochs: int = 20
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 5.0
    patience: int = 10
    seed: int = 0
    hidden: int = 1200
    feature_dim: int = 20
    dropout: float = 0.3
    max_antecedents: int | None = 50
    refine_rounds: int = 1

    def __post_init__(self):
        if not 0.0 < self.top_span_ratio <= 1.0:
            raise ConfigError("top_span_ratio must lie in (0, 1]")
        if self.detect_weight < 0:
            raise ConfigError("detect_weight must be >= 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.pretrain_epochs < 0:
            raise ConfigError("pretrain_epochs must be >= 0")
        if not self.clip_norm > 0:
            raise ConfigError("clip_norm must be > 0")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.max_span_width < 1 or self.hidden < 1 or self.feature_dim < 1:
            raise ConfigError("max_span_width, hidden and feature_dim must be >= 1")
        if self.max_antecedents is not None and self.max_antecedents < 1:
            raise ConfigError("max_antecedents must be >= 1 or 'inf'")
        if not 0 <= self.refine_rounds <= 2:
            raise ConfigError("refine_rounds must be 0, 1 or 2")

    @property
    def scoring(self) -> ScoringSettings:
        return ScoringSettings(self.max_span_width, self.top_span_ratio, self.max_antecedents, self.refine_rounds)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class RunConfig:
    corpus: str = ""
    dev_corpus: str = ""
    embeddings: str = ""
    static_embeddings: str = ""
    checkpoint: str = "model.prn"
    pretrain_checkpoint: str = ""
    predict_corpus: str = ""
    links: str = ""
    output: str = "out"
    synth_docs: int = 5
    vocab_size: int = 50
    embedding_dim: int = 16
    threads: int = 1
    dump_scores: bool = False
    dump_attention: bool = False
    strict_nearest: bool = False
    figures: bool = True
    train: TrainConfig = field(default_factory=TrainConfig)
    # keys set by a config file or flag rather than left at their defaults
    explicit: frozenset = field(default=frozenset(), compare=False)

    def replace(self, **changes) -> "RunConfig":
        train_keys = {f.name for f in fields(TrainConfig)}
        train_changes = {k: v for k, v in changes.items() if k in train_keys}
        run_changes = {k: v for k, v in changes.items() if k not in train_keys}
        cfg = dataclasses.replace(self, **run_changes)
        if train_changes:
            cfg = dataclasses.replace(cfg, train=cfg.train.replace(**train_changes))
        return cfg

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("train", "explicit")}
        out.update(train_dict(self.train))
        return out


def train_dict(cfg: TrainConfig) -> dict[str, Any]:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def _field_types() -> dict[str, Any]:
    types = {f.name: f.type for f in fields(RunConfig) if f.name not in ("train", "explicit")}
    types.update({f.name: f.type for f in fields(TrainConfig)})
    return types


def _coerce(key: str, raw: str, type_name: str):
    try:
        if type_name == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if type_name == "int":
            return int(raw)
        if type_name == "int | None":
            return None if raw.lower() in ("inf", "none", "") else int(raw)
        if type_name == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def format_value(value) -> str:
    if value is None:
        return "inf"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_pairs(text: str, source: str = "<config>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs[key] = value
    return pairs


def apply_pairs(cfg: RunConfig, pairs: dict[str, str], source: str = "<config>") -> RunConfig:
    types = _field_types()
    changes = {}
    for key, raw in pairs.items():
        if key not in types:
            raise ConfigError(f"{source}: unknown key {key!r}")
        changes[key] = _coerce(key, raw, types[key])
    return cfg.replace(explicit=cfg.explicit | frozenset(changes), **changes)


def load_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path:
        text = Path(path).read_text(encoding="utf-8")
        cfg = apply_pairs(cfg, parse_pairs(text, str(path)), str(path))
    if overrides:
        cfg = apply_pairs(cfg, overrides, "command line")
    return cfg


def format_config(values: dict[str, Any]) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in values.items())


def train_config_from_pairs(pairs: dict[str, str]) -> TrainConfig:
    types = {f.name: f.type for f in fields(TrainConfig)}
    known = {k: _coerce(k, v, types[k]) for k, v in pairs.items() if k in types}
    return TrainConfig(**known)
