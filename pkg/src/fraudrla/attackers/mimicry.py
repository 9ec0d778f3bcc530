"""Mimicry baselines: fit a distribution to genuine controllable values, sample it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from ..numkit import LOG_2PI, cholesky, make_rng, mean_and_covariance, mvn_sample

FAMILIES = ("uniform", "univariate", "multivariate", "mixture")
RIDGE = 1e-6


@dataclass(frozen=True)
class UniformModel:
    low: np.ndarray
    high: np.ndarray

    def sample(self, rng):
        return self.low + (self.high - self.low) * rng.random(self.low.size)


@dataclass(frozen=True)
class UnivariateNormalModel:
    mean: np.ndarray
    std: np.ndarray

    def sample(self, rng):
        return self.mean + self.std * rng.standard_normal(self.mean.size)


@dataclass(frozen=True)
class MultivariateNormalModel:
    mean: np.ndarray
    chol: np.ndarray

    def sample(self, rng):
        return mvn_sample(self.mean, self.chol, rng)


@dataclass(frozen=True)
class GaussianMixtureModel:
    weights: np.ndarray
    means: np.ndarray
    chols: np.ndarray
    log_likelihood: list[float] = field(default_factory=list, compare=False)

    def sample(self, rng):
        k = rng.choice(len(self.weights), p=self.weights)
        return mvn_sample(self.means[k], self.chols[k], rng)


MimicModel = UniformModel | UnivariateNormalModel | MultivariateNormalModel | GaussianMixtureModel


def _ridged_chol(cov):
    return cholesky(cov + RIDGE * np.eye(len(cov)))


def mimic_fit(rows, family: str, n_components: int = 10, seed: int = 0) -> MimicModel:
    x = np.asarray(rows, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    need = n_components if family == "mixture" else 2
    if len(x) < max(2, need):
        raise ValueError(f"{family} mimicry needs at least {max(2, need)} rows, got {len(x)}")
    if family == "uniform":
        return UniformModel(x.min(axis=0), x.max(axis=0))
    if family == "univariate":
        return UnivariateNormalModel(x.mean(axis=0), np.maximum(x.std(axis=0, ddof=1), 1e-12))
    if family == "multivariate":
        mean, cov = mean_and_covariance(x)
        return MultivariateNormalModel(mean, _ridged_chol(cov))
    if family == "mixture":
        return fit_gmm(x, n_components, seed)
    raise ValueError(f"unknown mimicry family {family!r}; expected one of {FAMILIES}")


def mimic_sample(model: MimicModel, rng: np.random.Generator) -> np.ndarray:
    return model.sample(rng)


# -- EM ----------------------------------------------------------------------

def _kmeans_pp(x, k, rng):
    centers = [x[rng.integers(len(x))]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        i = rng.choice(len(x), p=d2 / total) if total > 0 else rng.integers(len(x))
        centers.append(x[i])
        d2 = np.minimum(d2, ((x - x[i]) ** 2).sum(axis=1))
    return np.array(centers)


def _component_log_pdf(x, mean, chol):
    z = solve_triangular(chol, (x - mean).T, lower=True)
    return -0.5 * (z * z).sum(axis=0) - np.log(np.diag(chol)).sum() - 0.5 * x.shape[1] * LOG_2PI


def gmm_log_likelihood(x, weights, means, chols) -> float:
    """Mean per-row log-likelihood of a full-covariance mixture."""
    lp = np.stack([np.log(w) + _component_log_pdf(x, m, c) for w, m, c in zip(weights, means, chols)], axis=1)
    return float(logsumexp(lp, axis=1).mean())


def fit_gmm(x, n_components: int = 10, seed: int = 0, max_iter: int = 100, tol: float = 1e-6) -> GaussianMixtureModel:
    """Full-covariance EM seeded by k-means++; covariances ridged by ``1e-6 I``."""
    rng = make_rng(seed)
    n, d = x.shape
    k = n_components
    means = _kmeans_pp(x, k, rng)
    # hard assignment to the nearest seed for the initial covariances
    assign = ((x[:, None, :] - means[None]) ** 2).sum(axis=2).argmin(axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), assign] = 1.0
    history: list[float] = []
    weights, chols = None, None
    for _ in range(max_iter):
        # M-step
        nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        chols = np.empty((k, d, d))
        for j in range(k):
            diff = x - means[j]
            cov = (resp[:, j, None] * diff).T @ diff / nk[j]
            chols[j] = _ridged_chol(0.5 * (cov + cov.T))
        # E-step
        lp = np.stack([np.log(weights[j]) + _component_log_pdf(x, means[j], chols[j]) for j in range(k)], axis=1)
        norm = logsumexp(lp, axis=1)
        resp = np.exp(lp - norm[:, None])
        history.append(float(norm.mean()))
        if len(history) > 1 and history[-1] - history[-2] < tol:
            break
    return GaussianMixtureModel(weights, means, chols, history)
