"""Composed rule + model fraud engine, metrics, random-grid CV and JSON I/O."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Union

import numpy as np

from ..core import LabeledDataset
from ..numkit import make_rng
from .forest import ForestParams, RandomForestModel, forest_fit
from .network import MlpClassifierModel, NetworkParams, mlp_clf_fit
from .rules import ExtremeValueRule, rule_predict

ENGINE_FORMAT = "fraudrla-engine"
ENGINE_VERSION = 1

FOREST_GRID = {
    "n_trees": [50, 100, 200],
    "max_depth": [4, 8, 16, None],
    "min_leaf": [1, 5, 10],
}
NETWORK_GRID = {
    "hidden": [(32,), (64,), (32, 32)],
    "learning_rate": [1e-2, 1e-3],
    "epochs": [50, 100],
}


class FraudModel(Protocol):
    n_features: int

    def predict_proba(self, rows): ...


Model = Union[RandomForestModel, MlpClassifierModel]


@dataclass
class FraudEngine:
    """Blocks a transaction if either the rule or the model flags it."""

    rule: ExtremeValueRule
    model: FraudModel
    threshold: float = 0.5

    def __post_init__(self):
        if self.rule.lower.size != self.model.n_features:
            raise ValueError("rule and model must share the same feature space")

    @property
    def n_features(self) -> int:
        return self.model.n_features


def engine_decide(engine: FraudEngine, rows):
    """0 = accepted as genuine, 1 = blocked. Model scores ``>= threshold`` block."""
    blocked_by_rule = rule_predict(engine.rule, rows)
    proba = engine.model.predict_proba(rows)
    out = np.asarray(blocked_by_rule).astype(bool) | (np.asarray(proba) >= engine.threshold)
    return int(out) if np.ndim(out) == 0 else out.astype(np.int64)


def classification_metrics(predictions, labels) -> dict[str, float]:
    p = np.asarray(predictions).astype(int)
    y = np.asarray(labels).astype(int)
    if p.shape != y.shape:
        raise ValueError("predictions and labels differ in length")
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    acc = float(np.mean(p == y)) if len(y) else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"accuracy": acc, "precision": precision, "recall": recall, "f1": f1}


def fit_model(kind: str, train: LabeledDataset, hp: dict, seed: int) -> Model:
    if kind == "forest":
        return forest_fit(train, ForestParams(**hp), seed)
    if kind == "network":
        return mlp_clf_fit(train, NetworkParams(**hp), seed)
    raise ValueError(f"unknown classifier kind {kind!r}")


def _grid_configs(grid: dict) -> list[dict]:
    keys = list(grid)
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def stratified_folds(labels, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    folds = [[] for _ in range(k)]
    for label in (0, 1):
        idx = rng.permutation(np.flatnonzero(labels == label))
        for i, chunk in enumerate(np.array_split(idx, k)):
            folds[i].append(chunk)
    return [np.sort(np.concatenate(f)) for f in folds]


def grid_search_cv(
    train: LabeledDataset,
    kind: str,
    grid: dict | None = None,
    n_draws: int = 10,
    k_folds: int = 3,
    seed: int = 0,
) -> tuple[dict, list[tuple[dict, float]]]:
    """Random grid search scored by mean k-fold F1.

    Configurations are drawn uniformly without replacement (all of them if
    ``n_draws`` exceeds the grid). Returns the best configuration, ties going
    to the earliest draw, plus the full list of (config, score).
    """
    if n_draws < 1 or k_folds < 2:
        raise ValueError("need n_draws >= 1 and k_folds >= 2")
    grid = grid if grid is not None else (FOREST_GRID if kind == "forest" else NETWORK_GRID)
    configs = _grid_configs(grid)
    rng = make_rng(seed)
    picks = rng.permutation(len(configs))[:n_draws]
    folds = stratified_folds(train.labels, k_folds, rng)
    fold_seeds = rng.integers(0, 2**63, size=k_folds)
    scored = []
    for ci in picks:
        hp = configs[ci]
        f1s = []
        for fi, held in enumerate(folds):
            mask = np.ones(len(train), bool)
            mask[held] = False
            model = fit_model(kind, train.subset(mask), hp, int(fold_seeds[fi]))
            pred = (np.asarray(model.predict_proba(train.rows[held])) >= 0.5).astype(int)
            f1s.append(classification_metrics(pred, train.labels[held])["f1"])
        scored.append((hp, float(np.mean(f1s))))
    best = max(range(len(scored)), key=lambda i: (scored[i][1], -i))
    return scored[best][0], scored


# -- serialization -----------------------------------------------------------

def engine_to_dict(engine: FraudEngine) -> dict:
    if isinstance(engine.model, RandomForestModel):
        kind = "forest"
    elif isinstance(engine.model, MlpClassifierModel):
        kind = "network"
    else:
        raise TypeError(f"cannot serialize model of type {type(engine.model).__name__}")
    return {
        "format": ENGINE_FORMAT,
        "version": ENGINE_VERSION,
        "threshold": engine.threshold,
        "rule": engine.rule.to_dict(),
        "model_kind": kind,
        "model": engine.model.to_dict(),
    }


def engine_from_dict(d: dict) -> FraudEngine:
    if d.get("format") != ENGINE_FORMAT or d.get("version") != ENGINE_VERSION:
        raise ValueError(
            f"unsupported engine document {d.get('format')!r} v{d.get('version')}; "
            f"expected {ENGINE_FORMAT!r} v{ENGINE_VERSION}"
        )
    kind = d["model_kind"]
    model = RandomForestModel.from_dict(d["model"]) if kind == "forest" else MlpClassifierModel.from_dict(d["model"])
    return FraudEngine(ExtremeValueRule.from_dict(d["rule"]), model, float(d["threshold"]))


def save_engine(engine: FraudEngine, path) -> None:
    Path(path).write_text(json.dumps(engine_to_dict(engine)))


def load_engine(path) -> FraudEngine:
    return engine_from_dict(json.loads(Path(path).read_text()))
