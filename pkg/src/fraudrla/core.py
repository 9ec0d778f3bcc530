"""Domain types shared across the package and transaction (de)composition."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class PartitionError(ValueError):
    """Invalid feature partition or role-vector length mismatch."""


class ConfigError(ValueError):
    """Invalid run or sweep configuration."""


@dataclass(frozen=True)
class FeaturePartition:
    """Assignment of dataset columns to controllable / known / unknown roles."""

    controllable_idx: tuple[int, ...]
    known_idx: tuple[int, ...]
    unknown_idx: tuple[int, ...]
    total_features: int

    def __post_init__(self):
        for name in ("controllable_idx", "known_idx", "unknown_idx"):
            object.__setattr__(self, name, tuple(int(i) for i in getattr(self, name)))
        if not self.controllable_idx:
            raise PartitionError("controllable_idx must be non-empty")
        all_idx = self.controllable_idx + self.known_idx + self.unknown_idx
        if len(set(all_idx)) != len(all_idx):
            raise PartitionError("role index lists overlap")
        if set(all_idx) != set(range(self.total_features)):
            raise PartitionError(
                f"role index lists do not cover exactly 0..{self.total_features - 1}"
            )

    @property
    def n_controllable(self) -> int:
        return len(self.controllable_idx)

    @property
    def n_known(self) -> int:
        return len(self.known_idx)

    @property
    def n_unknown(self) -> int:
        return len(self.unknown_idx)

    @classmethod
    def all_controllable(cls, n_features: int) -> "FeaturePartition":
        return cls(tuple(range(n_features)), (), (), n_features)

    @classmethod
    def from_fractions(
        cls, n_features: int, known_frac: float, unknown_frac: float, seed: int
    ) -> "FeaturePartition":
        """Resolve role fractions to index lists with a seeded column shuffle.

        Counts are rounded to the nearest integer; known columns are taken first
        from the shuffled order, then unknown, and the remainder is controllable.
        """
        if not (0 <= known_frac <= 1 and 0 <= unknown_frac <= 1):
            raise ConfigError("partition fractions must lie in [0, 1]")
        if known_frac + unknown_frac >= 1:
            raise ConfigError("known + unknown fractions must be < 1")
        order = np.random.default_rng(seed).permutation(n_features)
        n_known = int(round(known_frac * n_features))
        n_unknown = int(round(unknown_frac * n_features))
        if n_known + n_unknown >= n_features:
            raise ConfigError("partition leaves no controllable feature")
        known = sorted(order[:n_known].tolist())
        unknown = sorted(order[n_known:n_known + n_unknown].tolist())
        controllable = sorted(order[n_known + n_unknown:].tolist())
        return cls(tuple(controllable), tuple(known), tuple(unknown), n_features)

    def to_dict(self) -> dict:
        return {
            "controllable_idx": list(self.controllable_idx),
            "known_idx": list(self.known_idx),
            "unknown_idx": list(self.unknown_idx),
            "total_features": self.total_features,
        }


@dataclass(frozen=True)
class Transaction:
    """A transaction split into its three role vectors."""

    controllable: np.ndarray
    known: np.ndarray
    unknown: np.ndarray

    def validate(self, partition: FeaturePartition) -> None:
        _check_lengths(self.controllable, self.known, self.unknown, partition)
        for v in (self.controllable, self.known, self.unknown):
            if not np.all(np.isfinite(v)):
                raise ValueError("transaction entries must be finite")


@dataclass
class LabeledDataset:
    """Feature matrix with binary labels (1 = fraud)."""

    rows: np.ndarray
    labels: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.rows.ndim != 2:
            raise ValueError("rows must be a 2-D matrix")
        if len(self.labels) != len(self.rows):
            raise ValueError("labels length must equal row count")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("dataset contains missing or non-finite values")
        if not self.feature_names:
            self.feature_names = [f"f{i}" for i in range(self.rows.shape[1])]
        if len(self.feature_names) != self.rows.shape[1]:
            raise ValueError("feature_names length must equal column count")

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return len(self.rows)

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.rows[idx], self.labels[idx], list(self.feature_names))

    def genuine(self) -> np.ndarray:
        return self.rows[self.labels == 0]

    def fraud(self) -> np.ndarray:
        return self.rows[self.labels == 1]


def _check_lengths(x_c, x_k, x_u, partition: FeaturePartition) -> None:
    for role, vec, n in (
        ("controllable", x_c, partition.n_controllable),
        ("known", x_k, partition.n_known),
        ("unknown", x_u, partition.n_unknown),
    ):
        if np.shape(vec)[-1] != n:
            raise PartitionError(
                f"{role} vector has length {np.shape(vec)[-1]}, partition expects {n}"
            )


def compose_transaction(x_c, x_k, x_u, partition: FeaturePartition) -> np.ndarray:
    """Reassemble a full feature row (or a batch of rows) from its role vectors."""
    x_c = np.asarray(x_c, dtype=float)
    x_k = np.asarray(x_k, dtype=float)
    x_u = np.asarray(x_u, dtype=float)
    _check_lengths(x_c, x_k, x_u, partition)
    batch = np.broadcast_shapes(x_c.shape[:-1], x_k.shape[:-1], x_u.shape[:-1])
    row = np.empty(batch + (partition.total_features,))
    row[..., list(partition.controllable_idx)] = x_c
    row[..., list(partition.known_idx)] = x_k
    row[..., list(partition.unknown_idx)] = x_u
    return row


def decompose_transaction(row, partition: FeaturePartition) -> Transaction:
    row = np.asarray(row, dtype=float)
    if row.shape[-1] != partition.total_features:
        raise PartitionError(
            f"row has {row.shape[-1]} features, partition expects {partition.total_features}"
        )
    return Transaction(
        row[..., list(partition.controllable_idx)],
        row[..., list(partition.known_idx)],
        row[..., list(partition.unknown_idx)],
    )


def validate_checkpoints(t_max: int, checkpoints: Sequence[int]) -> None:
    if list(checkpoints) != sorted(checkpoints):
        raise ConfigError("checkpoint_rounds must be sorted ascending")
    if checkpoints and t_max < max(checkpoints):
        raise ConfigError("t_max must be >= the largest checkpoint")
    if any(c < 1 for c in checkpoints):
        raise ConfigError("checkpoints must be positive")
