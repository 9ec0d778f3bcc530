"""Run configuration and the flat ``dotted.key = value`` config file format.

Example::

    # comments start with '#'
    t_max = 4000
    checkpoints = 300, 1000, 4000
    seed = 7
    data.scenario = 1
    partition.known = 0.25
    partition.unknown = 0
    attacker.kind = ppo
    attacker.ppo.actor_lr = 0.001
    engine.kind = network
"""

from __future__ import annotations

import dataclasses
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..attackers.mimicry import FAMILIES
from ..attackers.ppo import PpoConfig
from ..core import ConfigError, FeaturePartition, validate_checkpoints
from ..detectors.rules import RULE_MODES

STAGES = ("data", "balance", "split", "partition", "cv", "engine", "env", "agent", "attacker")


def stage_seed(master: int, stage: str) -> int:
    """Derive an independent 63-bit seed for one pipeline stage.

    ``SeedSequence([master, crc32(stage)])`` -> first 64-bit word, top bit dropped.
    """
    word = np.random.SeedSequence([int(master), zlib.crc32(stage.encode())]).generate_state(1, np.uint64)[0]
    return int(word) >> 1


@dataclass(frozen=True)
class DataSpec:
    scenario: int | None = 1
    n_samples: int = 5000
    csv: str | None = None
    label_column: str = "class"
    balance: bool = True
    train_fraction: float = 0.75
    # overrides for the scenario constants
    n_features: int | None = None
    clusters_per_class: int | None = None
    separation: float | None = None


@dataclass(frozen=True)
class PartitionSpec:
    known: float = 0.0
    unknown: float = 0.0
    controllable_idx: tuple[int, ...] | None = None
    known_idx: tuple[int, ...] | None = None
    unknown_idx: tuple[int, ...] | None = None

    @property
    def explicit(self) -> bool:
        return self.controllable_idx is not None

    def resolve(self, n_features: int, seed: int) -> FeaturePartition:
        if self.explicit:
            return FeaturePartition(self.controllable_idx, self.known_idx or (), self.unknown_idx or (), n_features)
        return FeaturePartition.from_fractions(n_features, self.known, self.unknown, seed)

    @property
    def label(self) -> str:
        if self.explicit:
            return f"C{len(self.controllable_idx)}K{len(self.known_idx or ())}U{len(self.unknown_idx or ())}"
        return f"known{self.known:.0%}/unknown{self.unknown:.0%}"


@dataclass(frozen=True)
class AttackerSpec:
    kind: str = "ppo"  # ppo | mimicry
    ppo: PpoConfig = field(default_factory=PpoConfig)
    action_scale: str = "train"  # train | none
    family: str = "multivariate"
    train_size: int | None = 1000  # None = whole genuine training split
    n_components: int = 10

    @property
    def label(self) -> str:
        if self.kind == "ppo":
            return "fraud-rla"
        return f"mimicry-{self.family}-{'full' if self.train_size is None else self.train_size}"


@dataclass(frozen=True)
class EngineSpec:
    kind: str = "network"  # forest | network
    n_draws: int = 10
    k_folds: int = 3
    tail_fraction: float = 0.10
    rule_mode: str = "range"
    rule_fit: str = "all"  # all | genuine
    threshold: float = 0.5
    hparams: str | None = None  # JSON dict: skip CV and use these


@dataclass(frozen=True)
class RunConfig:
    t_max: int = 4000
    checkpoints: tuple[int, ...] = (300, 1000, 4000)
    seed: int = 0
    data: DataSpec = field(default_factory=DataSpec)
    partition: PartitionSpec = field(default_factory=PartitionSpec)
    attacker: AttackerSpec = field(default_factory=AttackerSpec)
    engine: EngineSpec = field(default_factory=EngineSpec)

    def __post_init__(self):
        validate_checkpoints(self.t_max, list(self.checkpoints))
        if self.t_max < 1:
            raise ConfigError("t_max must be positive")
        if not self.partition.explicit:
            p = self.partition
            if not (0 <= p.known <= 1 and 0 <= p.unknown <= 1) or p.known + p.unknown >= 1:
                raise ConfigError("partition fractions must lie in [0,1] with known + unknown < 1")
        if self.attacker.kind not in ("ppo", "mimicry"):
            raise ConfigError(f"attacker.kind must be ppo or mimicry, got {self.attacker.kind!r}")
        if self.attacker.kind == "mimicry" and self.attacker.family not in FAMILIES:
            raise ConfigError(f"attacker.family must be one of {FAMILIES}")
        if self.attacker.action_scale not in ("train", "none"):
            raise ConfigError("attacker.action_scale must be train or none")
        if self.engine.kind not in ("forest", "network"):
            raise ConfigError(f"engine.kind must be forest or network, got {self.engine.kind!r}")
        if self.engine.rule_mode not in RULE_MODES:
            raise ConfigError(f"engine.rule_mode must be one of {RULE_MODES}")
        if self.engine.rule_fit not in ("all", "genuine"):
            raise ConfigError("engine.rule_fit must be all or genuine")
        if not 0 < self.engine.tail_fraction < 0.5:
            raise ConfigError("engine.tail_fraction must lie in (0, 0.5)")
        if self.data.scenario is None and self.data.csv is None:
            raise ConfigError("set data.scenario or data.csv")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_flat(self) -> dict[str, Any]:
        return _flatten(self.to_dict())

    def replace(self, **flat) -> "RunConfig":
        merged = self.to_flat()
        for k, v in flat.items():
            if k not in merged:
                raise ConfigError(f"unknown config key {k!r}")
            merged[k] = v
        return from_flat(merged)


def _flatten(d: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


_SECTIONS = {
    "data": DataSpec,
    "partition": PartitionSpec,
    "attacker": AttackerSpec,
    "attacker.ppo": PpoConfig,
    "engine": EngineSpec,
}


def _coerce(cls, name: str, value):
    ftype = {f.name: f.type for f in dataclasses.fields(cls)}[name]
    ftype = str(ftype)
    if value is None:
        return None
    if "tuple" in ftype:
        if isinstance(value, (int, float)):
            value = [value]
        return tuple(int(v) for v in value)
    if ftype.startswith("int"):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{name} must be an integer")
        return int(value)
    if ftype.startswith("float"):
        return float(value)
    if ftype.startswith("bool"):
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes")
        return bool(value)
    if ftype.startswith("str") and not isinstance(value, str):
        return json.dumps(value) if isinstance(value, (dict, list)) else str(value)
    return value


def _build(cls, flat: dict[str, Any], prefix: str):
    kwargs = {}
    names = {f.name for f in dataclasses.fields(cls)}
    for f in dataclasses.fields(cls):
        sub = f"{prefix}{f.name}"
        if sub in _SECTIONS:
            kwargs[f.name] = _build(_SECTIONS[sub], flat, sub + ".")
        elif sub in flat:
            kwargs[f.name] = _coerce(cls, f.name, flat[sub])
    del names
    return cls(**kwargs)


def from_flat(flat: dict[str, Any]) -> RunConfig:
    flat = dict(flat)
    if "checkpoint_rounds" in flat:
        flat["checkpoints"] = flat.pop("checkpoint_rounds")
    known = set(RunConfig().to_flat())
    unknown = sorted(set(flat) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    try:
        kwargs = {}
        for f in dataclasses.fields(RunConfig):
            if f.name in _SECTIONS:
                kwargs[f.name] = _build(_SECTIONS[f.name], flat, f.name + ".")
            elif f.name in flat:
                kwargs[f.name] = _coerce(RunConfig, f.name, flat[f.name])
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def parse_value(text: str):
    text = text.strip()
    if text == "":
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [parse_value(part) for part in text.split(",")]
    if text.lower() in ("none", "null"):
        return None
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_flat(text: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = parse_value(value)
    return out


def load_config(path, **overrides) -> RunConfig:
    try:
        flat = parse_flat(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    flat.update({k: v for k, v in overrides.items() if v is not None})
    return from_flat(flat)


def dump_flat(cfg: RunConfig) -> str:
    lines = []
    for k, v in cfg.to_flat().items():
        if isinstance(v, (list, tuple)):
            v = ", ".join(str(x) for x in v)
        elif v is None:
            v = "none"
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
