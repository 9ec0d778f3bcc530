"""Single attack campaign: data -> engine -> environment -> attacker loop."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..attackers.mimicry import mimic_fit
from ..attackers.ppo import PpoAgent
from ..core import FeaturePartition, LabeledDataset
from ..datagen import ScenarioSpec, balance, fit_scaler, generate_clusters, load_csv, scenario, split
from ..detectors.engine import FraudEngine, classification_metrics, engine_decide, fit_model, grid_search_cv
from ..detectors.rules import fit_extreme_rule
from ..env import AttackEnv
from ..numkit import make_rng
from .config import RunConfig, stage_seed

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunResult:
    rewards: list[int]
    checkpoints: dict[int, float]
    config: dict
    seed: int
    duration: float = 0.0
    engine_metrics: dict = field(default_factory=dict)
    engine_hparams: dict = field(default_factory=dict)
    partition: dict = field(default_factory=dict)

    @property
    def attacker(self) -> str:
        a = self.config["attacker"]
        if a["kind"] == "ppo":
            return "fraud-rla"
        size = "full" if a["train_size"] is None else a["train_size"]
        return f"mimicry-{a['family']}-{size}"

    @property
    def engine_kind(self) -> str:
        return self.config["engine"]["kind"]

    @property
    def setting(self) -> str:
        p = self.config["partition"]
        if p["controllable_idx"] is not None:
            return f"C{len(p['controllable_idx'])}K{len(p['known_idx'] or [])}U{len(p['unknown_idx'] or [])}"
        return f"known{p['known']:.0%}/unknown{p['unknown']:.0%}"

    @property
    def run_id(self) -> str:
        setting = self.setting.replace("/", "-").replace("%", "")
        return f"{self.engine_kind}_{setting}_{self.attacker}_s{self.seed}"

    def to_dict(self, with_duration: bool = False) -> dict:
        d = {
            "run_id": self.run_id,
            "seed": self.seed,
            "attacker": self.attacker,
            "engine": self.engine_kind,
            "setting": self.setting,
            "checkpoints": {str(k): v for k, v in self.checkpoints.items()},
            "engine_metrics": self.engine_metrics,
            "engine_hparams": self.engine_hparams,
            "partition": self.partition,
            "config": self.config,
            "rewards": self.rewards,
        }
        if with_duration:
            d["duration"] = self.duration
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        return cls(
            rewards=list(d["rewards"]),
            checkpoints={int(k): float(v) for k, v in d["checkpoints"].items()},
            config=d["config"],
            seed=int(d["seed"]),
            duration=float(d.get("duration", 0.0)),
            engine_metrics=d.get("engine_metrics", {}),
            engine_hparams=d.get("engine_hparams", {}),
            partition=d.get("partition", {}),
        )


def checkpoint_metrics(rewards, checkpoints) -> dict[int, float]:
    r = np.asarray(rewards, dtype=float)
    out = {}
    for n in checkpoints:
        if n < 1 or n > len(r):
            raise ValueError(f"checkpoint {n} outside trace of length {len(r)}")
        out[int(n)] = float(r[:n].sum() / n)
    return out


# -- stages ------------------------------------------------------------------

def build_dataset(cfg: RunConfig) -> LabeledDataset:
    d = cfg.data
    if d.csv is not None:
        return load_csv(d.csv, d.label_column)
    spec = scenario(d.scenario, n_samples=d.n_samples, seed=stage_seed(cfg.seed, "data"))
    spec = ScenarioSpec(
        n_features=d.n_features or spec.n_features,
        clusters_per_class=d.clusters_per_class or spec.clusters_per_class,
        class_separation=spec.class_separation if d.separation is None else d.separation,
        n_samples=spec.n_samples,
        seed=spec.seed,
    )
    return generate_clusters(spec)


def prepare_splits(cfg: RunConfig) -> tuple[LabeledDataset, LabeledDataset]:
    ds = build_dataset(cfg)
    if cfg.data.balance:
        ds = balance(ds, stage_seed(cfg.seed, "balance"))
    return split(ds, cfg.data.train_fraction, stage_seed(cfg.seed, "split"))


def build_engine(cfg: RunConfig, train: LabeledDataset) -> tuple[FraudEngine, dict]:
    e = cfg.engine
    if e.hparams:
        hp = json.loads(e.hparams)
        if "hidden" in hp:
            hp["hidden"] = tuple(hp["hidden"])
    else:
        hp, _ = grid_search_cv(train, e.kind, n_draws=e.n_draws, k_folds=e.k_folds, seed=stage_seed(cfg.seed, "cv"))
    model = fit_model(e.kind, train, hp, stage_seed(cfg.seed, "engine"))
    rule_rows = train.rows if e.rule_fit == "all" else train.genuine()
    rule = fit_extreme_rule(rule_rows, e.tail_fraction, e.rule_mode)
    return FraudEngine(rule, model, e.threshold), hp


def _engine_key(cfg: RunConfig) -> str:
    return json.dumps([dataclasses.asdict(cfg.data), dataclasses.asdict(cfg.engine), cfg.seed], sort_keys=True)


_ENGINE_CACHE: dict[str, tuple] = {}
_ENGINE_CACHE_SIZE = 16


def trained_engine(cfg: RunConfig):
    """(train, test, engine, hparams, metrics); memoized per process on data+engine+seed."""
    key = _engine_key(cfg)
    if key in _ENGINE_CACHE:
        return _ENGINE_CACHE[key]
    try:
        train, test = prepare_splits(cfg)
    except Exception as exc:
        raise StageError("data", exc) from exc
    try:
        engine, hp = build_engine(cfg, train)
    except Exception as exc:
        raise StageError("engine", exc) from exc
    model_pred = (np.asarray(engine.model.predict_proba(test.rows)) >= engine.threshold).astype(int)
    metrics = {
        "model": classification_metrics(model_pred, test.labels),
        "engine": classification_metrics(engine_decide(engine, test.rows), test.labels),
    }
    if len(_ENGINE_CACHE) >= _ENGINE_CACHE_SIZE:
        _ENGINE_CACHE.pop(next(iter(_ENGINE_CACHE)))
    _ENGINE_CACHE[key] = (train, test, engine, hp, metrics)
    return _ENGINE_CACHE[key]


class MimicryAttacker:
    def __init__(self, model):
        self.model = model

    def act(self, obs, rng):
        return self.model.sample(rng), 0.0


def build_attacker(cfg: RunConfig, train: LabeledDataset, partition: FeaturePartition):
    a = cfg.attacker
    cidx = list(partition.controllable_idx)
    if a.kind == "ppo":
        scaler = fit_scaler(train.rows).subset(cidx) if a.action_scale == "train" else None
        return PpoAgent.create(partition.n_known, partition.n_controllable, a.ppo,
                               seed=stage_seed(cfg.seed, "agent"), action_scaler=scaler)
    genuine = train.genuine()[:, cidx]
    rng = make_rng(stage_seed(cfg.seed, "attacker"))
    if a.train_size is not None and a.train_size < len(genuine):
        genuine = genuine[rng.choice(len(genuine), size=a.train_size, replace=False)]
    return MimicryAttacker(mimic_fit(genuine, a.family, a.n_components, seed=stage_seed(cfg.seed, "attacker")))


def attack_loop(env: AttackEnv, attacker, rng: np.random.Generator) -> list[int]:
    rewards = []
    learn = isinstance(attacker, PpoAgent)
    while not env.done:
        obs = env.reset()
        action, _ = attacker.act(obs, rng)
        reward = env.step(action)
        if learn:
            attacker.record_reward(reward)
            if attacker.ready:
                attacker.update(rng)
        rewards.append(int(reward))
    return rewards


def run_attack(cfg: RunConfig, engine_override: FraudEngine | None = None) -> RunResult:
    """Run one deterministic campaign. ``engine_override`` swaps in a prebuilt engine."""
    start = time.perf_counter()
    if engine_override is None:
        train, test, engine, hp, metrics = trained_engine(cfg)
    else:
        try:
            train, test = prepare_splits(cfg)
        except Exception as exc:
            raise StageError("data", exc) from exc
        engine, hp = engine_override, {}
        metrics = {"engine": classification_metrics(engine_decide(engine, test.rows), test.labels)}
    try:
        partition = cfg.partition.resolve(train.n_features, stage_seed(cfg.seed, "partition"))
    except Exception as exc:
        raise StageError("partition", exc) from exc
    pool = test.fraud()
    try:
        env = AttackEnv(engine, pool, partition, cfg.t_max, stage_seed(cfg.seed, "env"))
        attacker = build_attacker(cfg, train, partition)
    except Exception as exc:
        raise StageError("attacker", exc) from exc
    try:
        rewards = attack_loop(env, attacker, make_rng(stage_seed(cfg.seed, "agent") ^ 1))
    except Exception as exc:
        raise StageError("attack", exc) from exc
    return RunResult(
        rewards=rewards,
        checkpoints=checkpoint_metrics(rewards, cfg.checkpoints),
        config=cfg.to_dict(),
        seed=cfg.seed,
        duration=time.perf_counter() - start,
        engine_metrics=metrics,
        engine_hparams={k: (list(v) if isinstance(v, tuple) else v) for k, v in hp.items()},
        partition=partition.to_dict(),
    )
