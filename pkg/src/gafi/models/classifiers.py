"""Probabilistic classifiers trained by mini-batch SGD.

Two architectures: multinomial softmax regression and a one-hidden-layer
tanh MLP. Both minimize cross-entropy with momentum, weight decay, and a
step-decay learning-rate schedule, with gradients from the package's own
reverse-mode differentiation.

The per-epoch shuffle is keyed on sample content rather than position:
duplicate samples always land adjacent in the batch order, which keeps
averaged mini-batch gradients invariant under dataset duplication.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, runtime_checkable

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..data import Dataset
from ..errors import ConfigError, TrainingError
from ..seeding import derive_seed, epoch_order, sample_keys
from . import autodiff as ad

__all__ = [
    "TrainingBudget",
    "ProbabilisticClassifier",
    "SoftmaxClassifier",
    "MlpClassifier",
    "fit_classifier",
    "make_classifier",
    "lr_at",
]


@dataclass(frozen=True)
class TrainingBudget:
    """SGD budget: epochs, batching, and the learning-rate schedule.

    The learning rate starts at ``learning_rate`` and is multiplied by
    ``decay_factor`` at the start of each epoch listed in ``decay_epochs``.
    """

    epochs: int
    batch_size: int = 128
    learning_rate: float = 0.1
    decay_epochs: tuple[int, ...] = ()
    decay_factor: float = 0.1
    weight_decay: float = 0.0
    momentum: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.weight_decay < 0 or self.momentum < 0:
            raise ConfigError("weight_decay and momentum must be non-negative")
        decays = tuple(int(e) for e in self.decay_epochs)
        if any(b <= a for a, b in zip(decays, decays[1:])):
            raise ConfigError(f"decay_epochs must be strictly increasing, got {decays}")
        if decays and decays[-1] >= self.epochs:
            raise ConfigError("decay_epochs must all be smaller than epochs")
        object.__setattr__(self, "decay_epochs", decays)


def lr_at(budget: TrainingBudget, epoch: int) -> float:
    n_decays = sum(1 for e in budget.decay_epochs if e <= epoch)
    return budget.learning_rate * budget.decay_factor ** n_decays


@runtime_checkable
class ProbabilisticClassifier(Protocol):
    """Behavioral contract every oracle / downstream classifier satisfies."""

    def predict_proba(self, X) -> np.ndarray: ...

    def predict(self, X) -> np.ndarray: ...


class _SgdNetClassifier(BaseEstimator, ClassifierMixin):
    """Shared SGD loop; subclasses define the parameterization and logits."""

    def __init__(self, budget: TrainingBudget | None = None,
                 num_classes: int | None = None, seed: int = 0):
        self.budget = budget
        self.num_classes = num_classes
        self.seed = seed

    # -- architecture hooks -------------------------------------------------
    def _init_params(self, rng: np.random.Generator, d: int, C: int) -> list[ad.Tensor]:
        raise NotImplementedError

    def _logits(self, X: np.ndarray) -> ad.Tensor:
        raise NotImplementedError

    # -- training ------------------------------------------------------------
    def _effective_budget(self) -> TrainingBudget:
        return self.budget if self.budget is not None else TrainingBudget(epochs=100)

    def start_run(self, num_classes: int, feature_dim: int) -> "_SgdNetClassifier":
        """Initialize parameters; epochs are then driven via ``run_epoch``."""
        rng = np.random.default_rng(derive_seed(self.seed, "init"))
        budget = self._effective_budget()
        self.params_ = self._init_params(rng, feature_dim, num_classes)
        self.n_classes_ = num_classes
        self.n_features_ = feature_dim
        self._optimizer = ad.MomentumSgd(
            self.params_, momentum=budget.momentum, weight_decay=budget.weight_decay)
        return self

    def run_epoch(self, X: np.ndarray, y: np.ndarray, epoch: int) -> float:
        """One pass of mini-batch SGD; returns the mean batch loss."""
        budget = self._effective_budget()
        lr = lr_at(budget, epoch)
        order = epoch_order(sample_keys(X, y), self.seed, epoch)
        total, batches = 0.0, 0
        for start in range(0, order.size, budget.batch_size):
            idx = order[start:start + budget.batch_size]
            self._optimizer.zero_grad()
            loss = ad.cross_entropy_logits(self._logits(X[idx]), y[idx])
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            loss.backward()
            self._optimizer.step(lr)
            total += value
            batches += 1
        return total / max(batches, 1)

    def fit(self, X, y) -> "_SgdNetClassifier":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.shape[0] == 0:
            raise TrainingError("cannot fit on an empty training set")
        C = int(self.num_classes if self.num_classes is not None else y.max() + 1)
        self.start_run(C, X.shape[1])
        for epoch in range(self._effective_budget().epochs):
            self.run_epoch(X, y, epoch)
        return self

    # -- inference -----------------------------------------------------------
    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return ad.softmax(self._logits(X).data)

    def predict(self, X) -> np.ndarray:
        # argmax breaks ties toward the lowest class index
        return np.argmax(self.predict_proba(X), axis=1)


class SoftmaxClassifier(_SgdNetClassifier):
    """Multinomial logistic regression."""

    def _init_params(self, rng, d, C):
        scale = 1.0 / np.sqrt(d)
        self._W = ad.Tensor(scale * rng.standard_normal((d, C)), requires_grad=True)
        self._b = ad.Tensor(np.zeros(C), requires_grad=True)
        return [self._W, self._b]

    def _logits(self, X):
        return ad.add(ad.matmul(ad.Tensor(X), self._W), self._b)


class MlpClassifier(_SgdNetClassifier):
    """One hidden tanh layer of ``hidden_width`` units.

    ``init_scale`` sets the spread of the first-layer weights and biases.
    Values well above 1 start the hidden units deep in their nonlinear
    regime, which raises the net's effective capacity on low-dimensional
    inputs (it can then memorize label noise a near-linear start smooths
    over).
    """

    def __init__(self, budget: TrainingBudget | None = None,
                 num_classes: int | None = None, seed: int = 0,
                 hidden_width: int = 32, init_scale: float = 1.0):
        super().__init__(budget=budget, num_classes=num_classes, seed=seed)
        self.hidden_width = hidden_width
        self.init_scale = init_scale

    def _init_params(self, rng, d, C):
        h = self.hidden_width
        s = self.init_scale
        self._W1 = ad.Tensor(s * rng.standard_normal((d, h)), requires_grad=True)
        self._b1 = ad.Tensor(rng.uniform(-s, s, h), requires_grad=True)
        self._W2 = ad.Tensor(rng.standard_normal((h, C)) / np.sqrt(h), requires_grad=True)
        self._b2 = ad.Tensor(np.zeros(C), requires_grad=True)
        return [self._W1, self._b1, self._W2, self._b2]

    def _logits(self, X):
        hidden = ad.tanh(ad.add(ad.matmul(ad.Tensor(X), self._W1), self._b1))
        return ad.add(ad.matmul(hidden, self._W2), self._b2)


ClassifierKind = str | Callable[..., "_SgdNetClassifier"]


@dataclass(frozen=True)
class MlpKind:
    """Picklable classifier-kind callable carrying non-default MLP settings."""

    hidden_width: int = 32
    init_scale: float = 1.0

    def __call__(self, budget: TrainingBudget, num_classes: int, seed: int):
        return MlpClassifier(budget=budget, num_classes=num_classes, seed=seed,
                             hidden_width=self.hidden_width,
                             init_scale=self.init_scale)


def make_classifier(kind: ClassifierKind, budget: TrainingBudget,
                    num_classes: int, seed: int):
    """Instantiate an untrained classifier for the given kind.

    ``kind`` is ``"softmax"``, ``"mlp"``, or a factory callable with the same
    signature as this function (the seam tests use to inject stub models).
    """
    if callable(kind):
        return kind(budget=budget, num_classes=num_classes, seed=seed)
    if kind == "softmax":
        return SoftmaxClassifier(budget=budget, num_classes=num_classes, seed=seed)
    if kind == "mlp":
        return MlpClassifier(budget=budget, num_classes=num_classes, seed=seed)
    raise ConfigError(f"unknown classifier kind {kind!r}")


def fit_classifier(kind: ClassifierKind, train: Dataset, budget: TrainingBudget,
                   seed: int):
    """Train a classifier of the given kind on a Dataset."""
    clf = make_classifier(kind, budget, train.num_classes, seed)
    return clf.fit(train.features, train.labels)
