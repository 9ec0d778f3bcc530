"""PPO attacker with a state-conditioned full-covariance Gaussian policy.

The actor maps the known features to ``C + C*C`` numbers: ``C`` means and a
``C x C`` block read row-major as a Cholesky factor (strict lower triangle as-is,
diagonal through ``softplus + 1e-3``, upper triangle ignored). The critic has a
layer-norm input and predicts the single-step reward.

Internally the policy lives in standardized action units; when an action scaler
is supplied, sampled actions are mapped back to raw feature units with it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from ..datagen import ScalerStats
from ..numkit import (
    LOG_2PI,
    AdamState,
    MlpParams,
    adam_step,
    make_rng,
    mlp_forward,
    mlp_grad,
    mlp_init,
    mvn_log_pdf,
)

CHOL_FLOOR = 1e-3
CHECKPOINT_FORMAT = "fraudrla-agent"
CHECKPOINT_VERSION = 1


class PolicyDivergence(FloatingPointError):
    pass


@dataclass(frozen=True)
class PpoConfig:
    clip: float = 0.2
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    rollout: int = 64
    epochs: int = 4
    minibatch: int = 16
    entropy_coef: float = 1e-3
    hidden: int = 32


@dataclass(frozen=True)
class PolicyDistribution:
    mean: np.ndarray
    chol_lower: np.ndarray

    @property
    def covariance(self) -> np.ndarray:
        return self.chol_lower @ self.chol_lower.T


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def split_actor_output(out: np.ndarray, c: int) -> tuple[np.ndarray, np.ndarray]:
    """Actor output (..., C + C^2) -> (mean (..., C), chol (..., C, C))."""
    mean = out[..., :c]
    raw = out[..., c:].reshape(out.shape[:-1] + (c, c))
    chol = np.tril(raw, k=-1)
    diag = _softplus(np.diagonal(raw, axis1=-2, axis2=-1)) + CHOL_FLOOR
    idx = np.arange(c)
    chol[..., idx, idx] = diag
    return mean, chol


@dataclass
class _Step:
    obs: np.ndarray
    action: np.ndarray  # standardized units
    log_prob: float  # standardized units
    reward: float | None = None
    value: float | None = None


@dataclass
class PpoAgent:
    n_known: int
    n_controllable: int
    config: PpoConfig
    actor: MlpParams
    critic: MlpParams
    actor_opt: AdamState
    critic_opt: AdamState
    action_scaler: ScalerStats | None = None
    buffer: list[_Step] = field(default_factory=list)
    _pending: _Step | None = None

    @classmethod
    def create(cls, n_known: int, n_controllable: int, config: PpoConfig = PpoConfig(),
               seed: int = 0, action_scaler: ScalerStats | None = None) -> "PpoAgent":
        if n_controllable < 1:
            raise ValueError("the attacker needs at least one controllable feature")
        if action_scaler is not None and action_scaler.mean.size != n_controllable:
            raise ValueError("action scaler must cover exactly the controllable features")
        rng = make_rng(seed)
        c, h = n_controllable, config.hidden
        actor = mlp_init([n_known, h, h, c + c * c], rng, output_gain=0.01)
        critic = mlp_init([n_known, h, h, 1], rng, layer_norm=True, output_gain=1.0)
        return cls(
            n_known, n_controllable, config, actor, critic,
            AdamState.for_params(actor.arrays(), config.actor_lr),
            AdamState.for_params(critic.arrays(), config.critic_lr),
            action_scaler,
        )

    # -- acting --------------------------------------------------------------

    def _policy_units(self, obs) -> PolicyDistribution:
        obs = np.asarray(getattr(obs, "known", obs), dtype=float)
        if obs.shape != (self.n_known,):
            raise ValueError(f"observation must have length {self.n_known}")
        out, _ = mlp_forward(self.actor, obs)
        if not np.all(np.isfinite(out)):
            raise PolicyDivergence("actor produced non-finite output")
        return PolicyDistribution(*split_actor_output(out, self.n_controllable))

    def policy(self, obs) -> PolicyDistribution:
        """Action distribution in raw feature units."""
        d = self._policy_units(obs)
        if self.action_scaler is None:
            return d
        s = self.action_scaler
        return PolicyDistribution(d.mean * s.std + s.mean, s.std[:, None] * d.chol_lower)

    def _log_scale(self) -> float:
        return 0.0 if self.action_scaler is None else float(np.log(self.action_scaler.std).sum())

    def act(self, obs, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        if self._pending is not None:
            raise RuntimeError("previous action still awaits its reward")
        obs_vec = np.asarray(getattr(obs, "known", obs), dtype=float)
        d = self._policy_units(obs_vec)
        z = rng.standard_normal(self.n_controllable)
        u = d.mean + d.chol_lower @ z
        log_prob = mvn_log_pdf(u, d.mean, d.chol_lower)
        self._pending = _Step(obs_vec.copy(), u, log_prob)
        action = u if self.action_scaler is None else u * self.action_scaler.std + self.action_scaler.mean
        return action, log_prob - self._log_scale()

    def value(self, obs) -> float:
        out, _ = mlp_forward(self.critic, np.asarray(getattr(obs, "known", obs), dtype=float))
        return float(out[0])

    def record_reward(self, reward: float) -> None:
        if self._pending is None:
            raise RuntimeError("no pending action to attach a reward to")
        if len(self.buffer) >= self.config.rollout:
            raise RuntimeError("rollout buffer is full; call update() first")
        step, self._pending = self._pending, None
        step.reward = float(reward)
        step.value = self.value(step.obs)
        self.buffer.append(step)

    @property
    def ready(self) -> bool:
        return len(self.buffer) >= self.config.rollout

    # -- learning ------------------------------------------------------------

    def update(self, rng: np.random.Generator) -> dict[str, float]:
        cfg = self.config
        if len(self.buffer) < cfg.rollout:
            raise RuntimeError(f"buffer holds {len(self.buffer)} < {cfg.rollout} steps")
        obs = np.array([s.obs for s in self.buffer]).reshape(len(self.buffer), self.n_known)
        acts = np.array([s.action for s in self.buffer])
        old_logp = np.array([s.log_prob for s in self.buffer])
        rewards = np.array([s.reward for s in self.buffer])
        values = np.array([s.value for s in self.buffer])
        adv = normalize_advantages(rewards - values)

        report = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_fraction": 0.0}
        n_batches = 0
        n = len(rewards)
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            for start in range(0, n, cfg.minibatch):
                b = order[start:start + cfg.minibatch]
                stats = self._actor_step(obs[b], acts[b], old_logp[b], adv[b])
                stats["value_loss"] = self._critic_step(obs[b], rewards[b])
                for k in report:
                    report[k] += stats[k]
                n_batches += 1
        for k in report:
            report[k] /= n_batches
            if not np.isfinite(report[k]):
                raise PolicyDivergence(f"non-finite {k} during update")
        self.buffer.clear()
        return report

    def _actor_step(self, obs, acts, old_logp, adv) -> dict[str, float]:
        c = self.n_controllable
        m = len(adv)
        out, cache = mlp_forward(self.actor, obs)
        mean, chol = split_actor_output(out, c)
        logp, g_mean, g_chol = batch_log_prob_and_grads(acts, mean, chol)
        ratio = np.exp(logp - old_logp)
        eps = self.config.clip
        clipped = np.clip(ratio, 1 - eps, 1 + eps)
        surr = np.minimum(ratio * adv, clipped * adv)
        diag = np.diagonal(chol, axis1=-2, axis2=-1)
        entropy = 0.5 * c * (1.0 + LOG_2PI) + np.log(diag).sum(axis=-1)
        ent_coef = self.config.entropy_coef
        loss = -surr.mean() - ent_coef * entropy.mean()

        active = ratio * adv <= clipped * adv
        g_logp = -(ratio * adv * active) / m  # dLoss/dlogp per sample
        g_mu = g_logp[:, None] * g_mean
        g_L = g_logp[:, None, None] * g_chol
        idx = np.arange(c)
        g_L[:, idx, idx] -= ent_coef / (m * diag)

        raw_diag = out[:, c:].reshape(m, c, c)[:, idx, idx]
        g_raw = np.tril(g_L, k=-1)
        g_raw[:, idx, idx] = g_L[:, idx, idx] * _sigmoid(raw_diag)
        g_out = np.concatenate([g_mu, g_raw.reshape(m, c * c)], axis=1)
        grads, _ = mlp_grad(self.actor, cache, g_out)
        adam_step(self.actor_opt, self.actor.arrays(), grads)
        return {
            "policy_loss": float(loss),
            "entropy": float(entropy.mean()),
            "clip_fraction": float(np.mean(np.abs(ratio - 1) > eps)),
        }

    def _critic_step(self, obs, rewards) -> float:
        out, cache = mlp_forward(self.critic, obs)
        err = out[:, 0] - rewards
        grads, _ = mlp_grad(self.critic, cache, (2.0 * err / len(err))[:, None])
        adam_step(self.critic_opt, self.critic.arrays(), grads)
        return float(np.mean(err ** 2))

    def log_prob(self, obs, action_units) -> float:
        """Log-density of a standardized-unit action under the current policy."""
        d = self._policy_units(obs)
        return mvn_log_pdf(action_units, d.mean, d.chol_lower)

    # -- checkpoints ---------------------------------------------------------

    def to_dict(self) -> dict:
        def opt(s: AdamState):
            return {"lr": s.lr, "beta1": s.beta1, "beta2": s.beta2, "eps": s.eps, "step": s.step,
                    "m": [a.tolist() for a in s.m], "v": [a.tolist() for a in s.v]}
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "n_known": self.n_known,
            "n_controllable": self.n_controllable,
            "config": asdict(self.config),
            "actor": self.actor.to_dict(),
            "critic": self.critic.to_dict(),
            "actor_opt": opt(self.actor_opt),
            "critic_opt": opt(self.critic_opt),
            "action_scaler": None if self.action_scaler is None else self.action_scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PpoAgent":
        if d.get("format") != CHECKPOINT_FORMAT or d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported agent checkpoint {d.get('format')!r} v{d.get('version')}")
        actor = MlpParams.from_dict(d["actor"])
        critic = MlpParams.from_dict(d["critic"])

        def opt(o, arrays):
            return AdamState(o["lr"], o["beta1"], o["beta2"], o["eps"], o["step"],
                             [np.asarray(x, float).reshape(a.shape) for x, a in zip(o["m"], arrays)],
                             [np.asarray(x, float).reshape(a.shape) for x, a in zip(o["v"], arrays)])
        scaler = None if d["action_scaler"] is None else ScalerStats.from_dict(d["action_scaler"])
        return cls(d["n_known"], d["n_controllable"], PpoConfig(**d["config"]), actor, critic,
                   opt(d["actor_opt"], actor.arrays()), opt(d["critic_opt"], critic.arrays()), scaler)


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    centered = adv - adv.mean()
    std = adv.std()
    return centered if std < 1e-8 else centered / std


def clipped_surrogate(ratio, adv, clip: float):
    return np.minimum(ratio * adv, np.clip(ratio, 1 - clip, 1 + clip) * adv)


def batch_log_prob_and_grads(x, mean, chol):
    """Gaussian log-density per row with gradients w.r.t. the mean and the factor.

    Returns ``(logp (m,), dlogp/dmean (m, C), dlogp/dL (m, C, C) lower-triangular)``.
    """
    m, c = mean.shape
    logp = np.empty(m)
    g_mean = np.empty((m, c))
    g_chol = np.empty((m, c, c))
    for i in range(m):
        L = chol[i]
        z = solve_triangular(L, x[i] - mean[i], lower=True)
        w = solve_triangular(L, z, lower=True, trans="T")
        diag = np.diag(L)
        logp[i] = -0.5 * z @ z - np.log(diag).sum() - 0.5 * c * LOG_2PI
        g_mean[i] = w
        g = np.tril(np.outer(w, z))
        g[np.arange(c), np.arange(c)] -= 1.0 / diag
        g_chol[i] = g
    return logp, g_mean, g_chol


def ppo_policy(agent: PpoAgent, obs) -> PolicyDistribution:
    return agent.policy(obs)


def ppo_act(agent: PpoAgent, obs, rng) -> tuple[np.ndarray, float]:
    return agent.act(obs, rng)


def ppo_record_reward(agent: PpoAgent, reward: float) -> None:
    agent.record_reward(reward)


def ppo_update(agent: PpoAgent, rng) -> dict[str, float]:
    return agent.update(rng)
