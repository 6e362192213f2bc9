"""Run configuration as flat ``section.key=value`` text.

Example file::

    # comments and blank lines are ignored
    model.architecture=conv64
    loss.lambda=0.4
    train.epochs=20
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path

from ..backbone import BackboneConfig
from ..data import PreprocessConfig
from ..erasing import EraseConfig
from ..objective import LossWeights


@dataclass
class ScheduleConfig:
    epochs: int = 90
    episodes_per_epoch: int = 100
    lr_initial: float = 0.1
    lr_milestone: int = 60
    lr_at_milestone: float = 0.06
    lr_decay_factor: float = 0.2
    lr_decay_every: int = 10
    momentum: float = 0.9
    weight_decay: float = 5e-4
    n_way: int = 5
    k_shot: int = 1
    queries_per_class: int = 15


@dataclass
class EvalConfig:
    episodes: int = 2000
    n_way: int = 5
    k_shot: int = 1
    queries_per_class: int = 15
    val_episodes: int = 100


@dataclass
class TrainConfig:
    model: BackboneConfig = field(default_factory=BackboneConfig)
    train: ScheduleConfig = field(default_factory=ScheduleConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    erase: EraseConfig = field(default_factory=EraseConfig)
    data: PreprocessConfig = field(default_factory=PreprocessConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    variant: str = "full"
    seed: int = 0

    def lr_at(self, epoch: int) -> float:
        return lr_at(epoch, self.train)


def lr_at(epoch: int, s: ScheduleConfig = ScheduleConfig()) -> float:
    """Step schedule: constant, a fixed value at the milestone, then geometric decay."""
    if epoch < s.lr_milestone:
        lr = s.lr_initial
    else:
        steps = (epoch - s.lr_milestone) // s.lr_decay_every
        lr = s.lr_at_milestone * s.lr_decay_factor ** steps
    # 0.06 * 0.2 is 0.012000000000000002 in binary; report the decimal value
    return float(f"{lr:.12g}")


# python field name -> config key, where they differ
_KEY_ALIASES = {"loss.lam": "loss.lambda"}
_FIELD_ALIASES = {v: k for k, v in _KEY_ALIASES.items()}


def _coerce(value: str, current):
    if isinstance(current, bool):
        low = value.strip().lower()
        if low not in {"true", "false", "1", "0", "yes", "no"}:
            raise ValueError(f"not a boolean: {value!r}")
        return low in {"true", "1", "yes"}
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if isinstance(current, tuple):
        return tuple(type(current[0])(v) for v in value.split(","))
    return value.strip()


def _format(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def to_flat(cfg: TrainConfig) -> dict[str, str]:
    out = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if is_dataclass(value):
            for sub in fields(value):
                key = f"{f.name}.{sub.name}"
                out[_KEY_ALIASES.get(key, key)] = _format(getattr(value, sub.name))
        else:
            out[f.name] = _format(value)
    return out


def apply_overrides(cfg: TrainConfig, overrides: dict[str, str]) -> TrainConfig:
    """Set dotted keys in place; unknown keys raise ``KeyError``."""
    for key, raw in overrides.items():
        name = _FIELD_ALIASES.get(key, key)
        if "." in name:
            section, attr = name.split(".", 1)
            target = getattr(cfg, section, None)
            if target is None or not is_dataclass(target) or not hasattr(target, attr):
                raise KeyError(f"unknown config key {key!r}")
            setattr(target, attr, _coerce(str(raw), getattr(target, attr)))
            if hasattr(target, "__post_init__"):
                target.__post_init__()  # re-validate
        else:
            if not hasattr(cfg, name) or is_dataclass(getattr(cfg, name)):
                raise KeyError(f"unknown config key {key!r}")
            setattr(cfg, name, _coerce(str(raw), getattr(cfg, name)))
    return cfg


def parse_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path=None, overrides: dict[str, str] | None = None) -> TrainConfig:
    cfg = TrainConfig()
    if path is not None:
        apply_overrides(cfg, parse_text(Path(path).read_text()))
    if overrides:
        apply_overrides(cfg, overrides)
    return cfg


def dump_config(cfg: TrainConfig, path=None) -> str:
    text = "".join(f"{k}={v}\n" for k, v in to_flat(cfg).items())
    if path is not None:
        Path(path).write_text(text)
    return text


def config_digest(cfg: TrainConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:16]
