"""Class-conditional Gaussian mixture generator fit by EM.

EM iterations play the role of training epochs: a checkpoint is captured at
initialization and after every iteration, so downstream checkpoint
optimization has a curve to search. Covariances carry a small ridge so every
component stays safely positive definite.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from ..data import Dataset
from ..errors import ConfigError, TrainingError
from ..seeding import derive_seed
from .checkpoint import GeneratorCheckpoint
from .latent import NoiseSource, sample_latent

__all__ = ["GmmGenerator", "fit_gmm_generator", "gmm_sample", "gmm_log_likelihood"]

#: Added to every mixture covariance before Cholesky / density evaluation.
COVARIANCE_RIDGE = 1e-6

_LOG_2PI = np.log(2.0 * np.pi)


def _kmeanspp_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(X.shape[0])]
    dist2 = np.sum((X - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = dist2.sum()
        if total <= 0:
            centers[i] = X[rng.integers(X.shape[0])]
            continue
        probs = dist2 / total
        centers[i] = X[rng.choice(X.shape[0], p=probs)]
        dist2 = np.minimum(dist2, np.sum((X - centers[i]) ** 2, axis=1))
    return centers


def _log_gaussians(X: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """Log density of every sample under every component; shape (n, M)."""
    n, d = X.shape
    out = np.empty((n, means.shape[0]))
    for m in range(means.shape[0]):
        chol = np.linalg.cholesky(covs[m])
        diff = X - means[m]
        z = solve_triangular(chol, diff.T, lower=True)
        log_det = 2.0 * np.log(np.diag(chol)).sum()
        out[:, m] = -0.5 * (d * _LOG_2PI + log_det + np.sum(z * z, axis=0))
    return out


def _class_log_likelihood(X, weights, means, covs) -> float:
    joint = _log_gaussians(X, means, covs) + np.log(weights)
    return float(logsumexp(joint, axis=1).sum())


def gmm_log_likelihood(checkpoint: GeneratorCheckpoint, dataset: Dataset) -> list[float]:
    """Per-class training log-likelihood of a dataset under a GMM checkpoint."""
    weights = checkpoint.params["weights"]
    means = checkpoint.params["means"]
    covs = checkpoint.params["covs"]
    values = []
    for c in range(checkpoint.num_classes):
        Xc = dataset.features[dataset.labels == c]
        values.append(_class_log_likelihood(Xc, weights[c], means[c], covs[c]))
    return values


class GmmGenerator(BaseEstimator):
    """Conditional generator: per class, a full-covariance Gaussian mixture.

    Parameters
    ----------
    components_per_class : mixture size for every class
    iterations : EM iterations; one checkpoint is kept per iteration plus the
        initialization, so ``checkpoints_`` has ``iterations + 1`` entries
    seed : controls the k-means++-style initialization
    """

    def __init__(self, components_per_class: int = 1, iterations: int = 10, seed: int = 0):
        self.components_per_class = components_per_class
        self.iterations = iterations
        self.seed = seed

    def fit(self, X, y, num_classes: int | None = None) -> "GmmGenerator":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if self.components_per_class < 1:
            raise ConfigError("components_per_class must be positive")
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        C = int(num_classes if num_classes is not None else y.max() + 1)
        n, d = X.shape
        M = self.components_per_class

        weights = np.full((C, M), 1.0 / M)
        means = np.empty((C, M, d))
        covs = np.empty((C, M, d, d))
        class_data = []
        for c in range(C):
            Xc = X[y == c]
            if Xc.shape[0] == 0:
                raise TrainingError(f"class {c} has no training samples")
            if Xc.shape[0] < M:
                raise TrainingError(
                    f"class {c} has {Xc.shape[0]} samples, fewer than "
                    f"{M} mixture components"
                )
            class_data.append(Xc)
            rng = np.random.default_rng(derive_seed(self.seed, "gmm-init", c))
            means[c] = _kmeanspp_centers(Xc, M, rng)
            base_cov = np.cov(Xc.T, bias=True).reshape(d, d)
            covs[c] = base_cov + COVARIANCE_RIDGE * np.eye(d)

        checkpoints = [self._snapshot(0, C, d, weights, means, covs)]
        for it in range(1, self.iterations + 1):
            for c in range(C):
                weights[c], means[c], covs[c] = _em_step(
                    class_data[c], weights[c], means[c], covs[c])
            checkpoints.append(self._snapshot(it, C, d, weights, means, covs))

        self.checkpoints_ = checkpoints
        self.num_classes_ = C
        self.feature_dim_ = d
        return self

    @staticmethod
    def _snapshot(epoch, C, d, weights, means, covs) -> GeneratorCheckpoint:
        return GeneratorCheckpoint(
            epoch=epoch, model_kind="gmm", num_classes=C, feature_dim=d,
            latent_dim=d,
            params={"weights": weights.copy(), "means": means.copy(), "covs": covs.copy()},
        )

    def sample(self, label: int, count: int, stddev: float = 1.0, seed: int = 0,
               epoch: int | None = None) -> np.ndarray:
        cp = self.checkpoints_[-1 if epoch is None else epoch]
        return gmm_sample(cp, label, count, stddev, seed)


def _em_step(X, weights, means, covs):
    """One EM iteration for a single class; returns updated parameters."""
    joint = _log_gaussians(X, means, covs) + np.log(weights)
    log_resp = joint - logsumexp(joint, axis=1, keepdims=True)
    resp = np.exp(log_resp)
    nk = resp.sum(axis=0)
    nk = np.maximum(nk, 1e-300)
    new_weights = nk / nk.sum()
    new_means = (resp.T @ X) / nk[:, None]
    d = X.shape[1]
    new_covs = np.empty_like(covs)
    for m in range(means.shape[0]):
        diff = X - new_means[m]
        new_covs[m] = (resp[:, m, None] * diff).T @ diff / nk[m]
        new_covs[m] += COVARIANCE_RIDGE * np.eye(d)
    return new_weights, new_means, new_covs


def fit_gmm_generator(train: Dataset, components_per_class: int,
                      em_iterations: int, seed: int) -> list[GeneratorCheckpoint]:
    """Fit the class-conditional mixture and return all EM checkpoints."""
    gen = GmmGenerator(components_per_class=components_per_class,
                       iterations=em_iterations, seed=seed)
    gen.fit(train.features, train.labels, num_classes=train.num_classes)
    return gen.checkpoints_


def gmm_sample(checkpoint: GeneratorCheckpoint, label: int, count: int,
               stddev: float = 1.0, seed: int = 0) -> np.ndarray:
    """Draw samples for one class: component by mixture weight, then
    mean + stddev * L z with L the component covariance's Cholesky factor.

    Scaling ``stddev`` above 1 widens every component, the mixture analog of
    expanding the latent noise distribution.
    """
    if checkpoint.model_kind != "gmm":
        raise ValueError(f"expected a gmm checkpoint, got {checkpoint.model_kind!r}")
    if not 0 <= label < checkpoint.num_classes:
        raise ValueError(
            f"class index {label} outside [0, {checkpoint.num_classes})")
    d = checkpoint.feature_dim
    weights = checkpoint.params["weights"][label]
    means = checkpoint.params["means"][label]
    chols = np.linalg.cholesky(checkpoint.params["covs"][label])

    assign_rng = np.random.default_rng(derive_seed(seed, "component"))
    comp = assign_rng.choice(weights.shape[0], size=count, p=weights)
    z = sample_latent(NoiseSource(dim=d, stddev=1.0), count, derive_seed(seed, "offset"))
    offsets = np.einsum("nij,nj->ni", chols[comp], z)
    return means[comp] + stddev * offsets
