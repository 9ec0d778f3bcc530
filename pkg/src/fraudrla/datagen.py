"""Synthetic cluster scenarios, CSV ingestion, balancing, splitting and scaling."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import LabeledDataset
from .numkit import make_rng

log = logging.getLogger(__name__)

# Centroid half-widths per scenario. Uniform centroids in 64 dimensions sit much
# further apart than in 16, so the intermediate scenario needs a narrower cube
# than the easy one to be harder at all.
HIGH_SEPARATION = 4.0
INTERMEDIATE_SEPARATION = 1.5
SMALL_SEPARATION = 0.8


@dataclass(frozen=True)
class ScenarioSpec:
    n_features: int
    clusters_per_class: int
    class_separation: float
    n_samples: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.n_features < 2:
            raise ValueError("n_features must be >= 2")
        if self.clusters_per_class < 1:
            raise ValueError("clusters_per_class must be >= 1")
        if self.n_samples < 100:
            raise ValueError("n_samples must be >= 100")
        if self.class_separation < 0:
            raise ValueError("class_separation must be non-negative")


# The three benchmark scenarios: easy, intermediate, hard.
SCENARIOS = {
    1: dict(n_features=16, clusters_per_class=1, class_separation=HIGH_SEPARATION),
    2: dict(n_features=64, clusters_per_class=8, class_separation=INTERMEDIATE_SEPARATION),
    3: dict(n_features=64, clusters_per_class=16, class_separation=SMALL_SEPARATION),
}


def scenario(number: int, n_samples: int = 5000, seed: int = 0) -> ScenarioSpec:
    return ScenarioSpec(**SCENARIOS[number], n_samples=n_samples, seed=seed)


def _split_counts(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def generate_clusters(spec: ScenarioSpec) -> LabeledDataset:
    """Gaussian blobs around hypercube-uniform centroids, classes balanced.

    Genuine rows (label 0) take ``floor(n/2)`` samples, frauds the rest. Rows
    are shuffled so that labels are interleaved.
    """
    rng = make_rng(spec.seed)
    s = spec.class_separation
    rows, labels = [], []
    for label, n_class in ((0, spec.n_samples // 2), (1, spec.n_samples - spec.n_samples // 2)):
        centroids = rng.uniform(-s, s, size=(spec.clusters_per_class, spec.n_features))
        for centroid, n in zip(centroids, _split_counts(n_class, spec.clusters_per_class)):
            rows.append(centroid + rng.standard_normal((n, spec.n_features)))
            labels.append(np.full(n, label))
    x = np.vstack(rows)
    y = np.concatenate(labels)
    order = rng.permutation(len(y))
    return LabeledDataset(x[order], y[order], [f"f{i}" for i in range(spec.n_features)])


def load_csv(path, label_column: str = "class") -> LabeledDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row expected") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ValueError(f"{path}: label column {label_column!r} not in header")
        li = header.index(label_column)
        names = [h for i, h in enumerate(header) if i != li]
        rows, labels = [], []
        for r, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ValueError(f"{path}: row {r} has {len(rec)} cells, expected {len(header)}")
            vals = []
            for c, cell in enumerate(rec):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {r}, column {header[c]!r}: non-numeric value {cell!r}"
                    ) from None
                if not np.isfinite(v):
                    raise ValueError(f"{path}: row {r}, column {header[c]!r}: missing value")
                vals.append(v)
            lab = vals.pop(li)
            if lab not in (0.0, 1.0):
                raise ValueError(f"{path}: row {r}: label {rec[li]!r} is not 0 or 1")
            rows.append(vals)
            labels.append(int(lab))
    x = np.asarray(rows, dtype=float).reshape(len(rows), len(names))
    return LabeledDataset(x, np.asarray(labels, dtype=np.int64), names)


def write_csv(ds: LabeledDataset, path, label_column: str = "class") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.feature_names) + [label_column])
        for row, lab in zip(ds.rows, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def balance(ds: LabeledDataset, seed: int) -> LabeledDataset:
    """Undersample the majority class to the minority count and shuffle."""
    rng = make_rng(seed)
    idx0 = np.flatnonzero(ds.labels == 0)
    idx1 = np.flatnonzero(ds.labels == 1)
    if len(idx0) == 0 or len(idx1) == 0:
        raise ValueError("both classes must be present to balance")
    n = min(len(idx0), len(idx1))
    keep0 = idx0 if len(idx0) == n else rng.choice(idx0, size=n, replace=False)
    keep1 = idx1 if len(idx1) == n else rng.choice(idx1, size=n, replace=False)
    keep = rng.permutation(np.concatenate([keep0, keep1]))
    return ds.subset(keep)


def split(ds: LabeledDataset, train_fraction: float = 0.75, seed: int = 0):
    """Stratified split into (train, test)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = make_rng(seed)
    train_idx, test_idx = [], []
    for label in (0, 1):
        idx = rng.permutation(np.flatnonzero(ds.labels == label))
        n_train = int(round(train_fraction * len(idx)))
        train_idx.append(idx[:n_train])
        test_idx.append(idx[n_train:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise ValueError("train_fraction leaves one side of the split empty")
    return ds.subset(train_idx), ds.subset(test_idx)


@dataclass(frozen=True)
class ScalerStats:
    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "degenerate": self.degenerate.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerStats":
        return cls(np.asarray(d["mean"], float), np.asarray(d["std"], float),
                   np.asarray(d["degenerate"], bool))

    def subset(self, idx) -> "ScalerStats":
        idx = list(idx)
        return ScalerStats(self.mean[idx], self.std[idx], self.degenerate[idx])


def fit_scaler(train) -> ScalerStats:
    x = train.rows if isinstance(train, LabeledDataset) else np.asarray(train, dtype=float)
    if len(x) == 0:
        raise ValueError("cannot fit a scaler on an empty training set")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    degenerate = std <= 0
    if degenerate.any():
        log.warning("zero-variance columns %s: std forced to 1", np.flatnonzero(degenerate).tolist())
    return ScalerStats(mean, np.where(degenerate, 1.0, std), degenerate)


def apply_scaler(stats: ScalerStats, rows) -> np.ndarray:
    return (np.asarray(rows, dtype=float) - stats.mean) / stats.std


def invert_scaler(stats: ScalerStats, rows) -> np.ndarray:
    return np.asarray(rows, dtype=float) * stats.std + stats.mean
