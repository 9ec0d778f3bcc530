"""Feed-forward fraud classifier trained with binary cross-entropy and Adam."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..core import LabeledDataset
from ..datagen import ScalerStats, apply_scaler, fit_scaler
from ..numkit import AdamState, MlpParams, adam_step, make_rng, mlp_forward, mlp_grad, mlp_init


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class NetworkParams:
    hidden: tuple[int, ...] = (32,)
    learning_rate: float = 1e-2
    epochs: int = 50
    batch_size: int = 64

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class MlpClassifierModel:
    net: MlpParams
    scaler: ScalerStats
    params: NetworkParams
    loss_history: list[float]

    @property
    def n_features(self) -> int:
        return self.net.n_inputs

    def predict_proba(self, rows) -> np.ndarray | float:
        x = np.asarray(rows, dtype=float)
        if x.shape[-1] != self.n_features:
            raise ValueError("feature count does not match the network")
        logit, _ = mlp_forward(self.net, apply_scaler(self.scaler, x))
        p = _sigmoid(logit[..., 0])
        return float(p) if x.ndim == 1 else p

    def to_dict(self) -> dict:
        return {"params": asdict(self.params), "net": self.net.to_dict(),
                "scaler": self.scaler.to_dict(), "loss_history": list(self.loss_history)}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpClassifierModel":
        p = dict(d["params"])
        p["hidden"] = tuple(p["hidden"])
        return cls(MlpParams.from_dict(d["net"]), ScalerStats.from_dict(d["scaler"]),
                   NetworkParams(**p), list(d["loss_history"]))


def mlp_clf_fit(train: LabeledDataset, params: NetworkParams, seed: int) -> MlpClassifierModel:
    y = train.labels.astype(float)
    if len(np.unique(y)) < 2:
        raise ValueError("network training needs both classes present")
    rng = make_rng(seed)
    scaler = fit_scaler(train)
    x = apply_scaler(scaler, train.rows)
    net = mlp_init([x.shape[1], *params.hidden, 1], rng, hidden_gain=1.0)
    opt = AdamState.for_params(net.arrays(), params.learning_rate)
    history = []
    n = len(y)
    for _ in range(params.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, params.batch_size):
            b = order[start:start + params.batch_size]
            logit, cache = mlp_forward(net, x[b])
            z = logit[:, 0]
            # numerically stable BCE on logits
            loss = np.maximum(z, 0) - z * y[b] + np.log1p(np.exp(-np.abs(z)))
            total += loss.sum()
            g = ((_sigmoid(z) - y[b]) / len(b))[:, None]
            grads, _ = mlp_grad(net, cache, g)
            adam_step(opt, net.arrays(), grads)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise DivergenceError("network training loss became non-finite")
        history.append(float(epoch_loss))
    return MlpClassifierModel(net, scaler, params, history)
