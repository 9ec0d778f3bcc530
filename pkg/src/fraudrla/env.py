"""Single-step partially observable attack environment around a fraud engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FeaturePartition, compose_transaction
from .detectors.engine import engine_decide
from .numkit import make_rng


class BudgetExhausted(RuntimeError):
    pass


class EpisodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class Observation:
    known: np.ndarray
    round: int


class AttackEnv:
    """One episode = draw a real fraud context, accept one action, score it.

    Contexts are drawn uniformly with replacement from ``context_pool``; the
    known slice is shown to the attacker and the unknown slice is kept hidden
    until the action is composed into a full transaction.
    """

    def __init__(self, engine, context_pool, partition: FeaturePartition, t_max: int, seed: int):
        pool = np.asarray(context_pool, dtype=float)
        if pool.ndim != 2 or len(pool) == 0:
            raise ValueError("context_pool must be a non-empty row matrix")
        if pool.shape[1] != partition.total_features:
            raise ValueError("context rows do not match the partition width")
        self.engine = engine
        self.partition = partition
        self.t_max = int(t_max)
        self.t = 0
        self.rng = make_rng(seed)
        self._known = pool[:, list(partition.known_idx)]
        self._unknown = pool[:, list(partition.unknown_idx)]
        self.context_pool = pool
        self._pending: int | None = None
        self.last_row: np.ndarray | None = None

    @property
    def done(self) -> bool:
        return self.t >= self.t_max

    def reset(self) -> Observation:
        if self.t >= self.t_max:
            raise BudgetExhausted(f"budget of {self.t_max} rounds exhausted")
        self._pending = int(self.rng.integers(len(self.context_pool)))
        return Observation(self._known[self._pending].copy(), self.t)

    def step(self, action) -> int:
        if self._pending is None:
            raise EpisodeError("step() called without a pending reset()")
        action = np.asarray(action, dtype=float)
        if action.shape != (self.partition.n_controllable,):
            raise ValueError(
                f"action must have length {self.partition.n_controllable}, got {action.shape}"
            )
        i, self._pending = self._pending, None
        row = compose_transaction(action, self._known[i], self._unknown[i], self.partition)
        self.last_row = row
        self.t += 1
        return 1 - int(engine_decide(self.engine, row))


def env_reset(env: AttackEnv) -> Observation:
    return env.reset()


def env_step(env: AttackEnv, action) -> int:
    return env.step(action)
