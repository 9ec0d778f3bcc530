from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numkit import percentile

RULE_MODES = ("quantile", "range")


@dataclass(frozen=True)
class ExtremeValueRule:
    """Per-feature closed acceptance interval ``[lower, upper]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ValueError("rule needs one lower <= upper pair per feature")

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExtremeValueRule":
        return cls(np.asarray(d["lower"], float), np.asarray(d["upper"], float))


def fit_extreme_rule(rows, tail_fraction: float = 0.10, mode: str = "quantile") -> ExtremeValueRule:
    """Fit per-feature extreme-value thresholds.

    ``quantile``: the interval between the ``tail/2`` and ``1 - tail/2``
    percentiles of each column, i.e. the central ``1 - tail`` of observed values.

    ``range``: the observed ``[min, max]`` of each column widened on both sides by
    ``tail * (max - min)``; only values beyond what the training set has seen are
    treated as extreme.
    """
    x = np.asarray(rows, dtype=float)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("rule needs a non-empty 2-D row matrix")
    if not 0.0 < tail_fraction < 0.5:
        raise ValueError("tail_fraction must lie in (0, 0.5)")
    if mode == "quantile":
        lower = np.array([percentile(col, tail_fraction / 2) for col in x.T])
        upper = np.array([percentile(col, 1 - tail_fraction / 2) for col in x.T])
    elif mode == "range":
        lo, hi = x.min(axis=0), x.max(axis=0)
        span = hi - lo
        lower, upper = lo - tail_fraction * span, hi + tail_fraction * span
    else:
        raise ValueError(f"unknown rule mode {mode!r}; expected one of {RULE_MODES}")
    return ExtremeValueRule(lower, upper)


def rule_predict(rule: ExtremeValueRule, rows) -> np.ndarray | int:
    """1 (block) where any feature lies strictly outside its interval, else 0."""
    x = np.asarray(rows, dtype=float)
    if x.shape[-1] != rule.lower.size:
        raise ValueError("row length does not match the rule")
    out = ((x < rule.lower) | (x > rule.upper)).any(axis=-1).astype(np.int64)
    return int(out) if x.ndim == 1 else out
