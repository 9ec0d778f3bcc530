"""Small numerical kernel: RNG, Gaussian helpers, a tanh MLP with backprop, Adam.

All randomness goes through ``numpy.random.Generator`` backed by PCG64, which
has a published algorithm and stable output for a given integer seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

LOG_2PI = float(np.log(2.0 * np.pi))
LAYER_NORM_EPS = 1e-5


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# -- Gaussian machinery ------------------------------------------------------

def cholesky(a) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == a``."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("cholesky expects a square matrix")
    if not np.allclose(a, a.T, rtol=0, atol=1e-9):
        raise ValueError("cholesky expects a symmetric matrix")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc


def mvn_sample(mean, chol_lower, rng: np.random.Generator) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    chol_lower = np.asarray(chol_lower, dtype=float)
    if chol_lower.shape != (mean.size, mean.size):
        raise ValueError("chol_lower shape does not match mean")
    z = rng.standard_normal(mean.size)
    return mean + chol_lower @ z


def mvn_log_pdf(x, mean, chol_lower) -> float:
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    chol_lower = np.asarray(chol_lower, dtype=float)
    n = mean.size
    if n == 0:
        return 0.0
    z = solve_triangular(chol_lower, x - mean, lower=True)
    return float(-0.5 * z @ z - np.log(np.diag(chol_lower)).sum() - 0.5 * n * LOG_2PI)


def percentile(values, p: float) -> float:
    """Linear interpolation between order statistics at rank ``p * (n - 1)``."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("percentile of an empty vector")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    h = p * (v.size - 1)
    lo = int(np.floor(h))
    hi = int(np.ceil(h))
    return float(v[lo] + (h - lo) * (v[hi] - v[lo]))


def mean_and_covariance(samples) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two samples")
    mean = x.mean(axis=0)
    d = x - mean
    cov = d.T @ d / (x.shape[0] - 1)
    return mean, 0.5 * (cov + cov.T)


# -- MLP ---------------------------------------------------------------------

@dataclass
class MlpParams:
    """Weights ``W[i]`` have shape (out, in); ``activations[i]`` is "tanh" or "linear"."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]
    layer_norm: bool = False
    ln_gain: np.ndarray | None = None
    ln_bias: np.ndarray | None = None

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases and activations must have equal length")
        for i in range(1, len(self.weights)):
            if self.weights[i].shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i} input width does not chain with layer {i - 1}")
        for w, b in zip(self.weights, self.biases):
            if b.shape != (w.shape[0],):
                raise ValueError("bias shape does not match weight rows")
        for a in self.activations:
            if a not in ("tanh", "linear"):
                raise ValueError(f"unknown activation {a!r}")
        if self.layer_norm and self.ln_gain is None:
            self.ln_gain = np.ones(self.n_inputs)
            self.ln_bias = np.zeros(self.n_inputs)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_outputs(self) -> int:
        return self.weights[-1].shape[0]

    def arrays(self) -> list[np.ndarray]:
        """Flat list of trainable arrays, in the order used by gradients and Adam."""
        out = []
        if self.layer_norm:
            out += [self.ln_gain, self.ln_bias]
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
            self.layer_norm,
            None if self.ln_gain is None else self.ln_gain.copy(),
            None if self.ln_bias is None else self.ln_bias.copy(),
        )

    def to_dict(self) -> dict:
        return {
            "activations": list(self.activations),
            "layer_norm": self.layer_norm,
            "arrays": [_encode_array(a) for a in self.arrays()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpParams":
        arrays = [_decode_array(a) for a in d["arrays"]]
        ln = d["layer_norm"]
        gain = bias = None
        if ln:
            gain, bias, arrays = arrays[0], arrays[1], arrays[2:]
        return cls(arrays[0::2], arrays[1::2], list(d["activations"]), ln, gain, bias)


def _encode_array(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _decode_array(d: dict) -> np.ndarray:
    return np.asarray(d["data"], dtype=float).reshape(d["shape"])


def mlp_init(
    sizes: list[int],
    rng: np.random.Generator,
    *,
    layer_norm: bool = False,
    hidden_gain: float = np.sqrt(2.0),
    output_gain: float = 1.0,
    output_activation: str = "linear",
) -> MlpParams:
    """Orthogonal weight init with zero biases; tanh on every hidden layer."""
    weights, biases, acts = [], [], []
    n_layers = len(sizes) - 1
    for i in range(n_layers):
        gain = output_gain if i == n_layers - 1 else hidden_gain
        weights.append(_orthogonal(sizes[i + 1], sizes[i], rng) * gain)
        biases.append(np.zeros(sizes[i + 1]))
        acts.append(output_activation if i == n_layers - 1 else "tanh")
    return MlpParams(weights, biases, acts, layer_norm)


def _orthogonal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols))
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T


@dataclass
class MlpCache:
    params_id: int
    x: np.ndarray
    ln_xhat: np.ndarray | None
    ln_std: np.ndarray | None
    layer_inputs: list[np.ndarray]
    layer_outputs: list[np.ndarray]


def mlp_forward(params: MlpParams, x) -> tuple[np.ndarray, MlpCache]:
    """Forward pass for one input vector or a batch of row vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.n_inputs:
        raise ValueError(f"input width {x.shape[-1]} != network input {params.n_inputs}")
    h = x
    xhat = std = None
    if params.layer_norm and params.n_inputs > 0:
        mu = h.mean(axis=-1, keepdims=True)
        std = h.std(axis=-1, keepdims=True) + LAYER_NORM_EPS
        xhat = (h - mu) / std
        h = xhat * params.ln_gain + params.ln_bias
    inputs, outputs = [], []
    for w, b, act in zip(params.weights, params.biases, params.activations):
        inputs.append(h)
        h = h @ w.T + b
        if act == "tanh":
            h = np.tanh(h)
        outputs.append(h)
    return h, MlpCache(id(params), x, xhat, std, inputs, outputs)


def mlp_grad(params: MlpParams, cache: MlpCache, grad_out) -> tuple[list[np.ndarray], np.ndarray]:
    """Reverse-mode gradients; parameter grads follow ``params.arrays()`` order.

    For batched inputs the gradients are summed over the batch.
    """
    if cache.params_id != id(params) or len(cache.layer_inputs) != len(params.weights):
        raise ValueError("cache does not belong to these parameters")
    g = np.asarray(grad_out, dtype=float)
    if g.shape != cache.layer_outputs[-1].shape:
        raise ValueError("output gradient shape does not match the cached forward pass")
    layer_grads = []
    for i in reversed(range(len(params.weights))):
        if params.activations[i] == "tanh":
            g = g * (1.0 - cache.layer_outputs[i] ** 2)
        h_in = cache.layer_inputs[i]
        if g.ndim == 1:
            gw = np.outer(g, h_in)
            gb = g.copy()
        else:
            gw = g.T @ h_in
            gb = g.sum(axis=0)
        layer_grads.append((gw, gb))
        g = g @ params.weights[i]
    grads: list[np.ndarray] = []
    if params.layer_norm:
        if params.n_inputs == 0:
            grads += [np.zeros(0), np.zeros(0)]
            g_in = g
        else:
            xhat, std = cache.ln_xhat, cache.ln_std
            ggain = g * xhat
            grads += [ggain if ggain.ndim == 1 else ggain.sum(axis=0),
                      g.copy() if g.ndim == 1 else g.sum(axis=0)]
            gx = g * params.ln_gain
            # d/dx of (x - mean) / (sigma + eps), sigma the population std
            sigma = std - LAYER_NORM_EPS
            safe_sigma = np.where(sigma > 0, sigma, 1.0)
            gx_mean = gx.mean(axis=-1, keepdims=True)
            gx_xhat = (gx * xhat).mean(axis=-1, keepdims=True)
            g_in = (gx - gx_mean) / std - xhat * gx_xhat / safe_sigma
    else:
        g_in = g
    for gw, gb in reversed(layer_grads):
        grads += [gw, gb]
    return grads, g_in


# -- Adam --------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, arrays: list[np.ndarray], lr: float, **kw) -> "AdamState":
        return cls(lr, m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays], **kw)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """Bias-corrected Adam descent step; updates ``params`` and ``state`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state disagree in length")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("gradient shape does not match parameter shape")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
