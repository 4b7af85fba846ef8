"""Confidence-gated rejection sampling of generated data.

An oracle classifier trained on real data scores every generated sample.
Samples predicted as the wrong class are always discarded; surviving samples
must additionally carry oracle confidence at or above the active threshold.
Generation proceeds per class in batches until each class quota is met.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigError, StarvationError
from .models.classifiers import ProbabilisticClassifier
from .seeding import derive_seed

__all__ = [
    "FilterPolicy",
    "GenerationQuota",
    "passes_filter",
    "generate_filtered",
    "threshold_grid",
    "Sampler",
]

#: (label, count, stddev, seed) -> (count, feature_dim) feature matrix.
Sampler = Callable[[int, int, float, int], np.ndarray]

#: Rejection-sampling batches are at least this large, to amortize sampler
#: overhead without changing semantics.
MIN_BATCH = 256


def _check_grid(grid: tuple[float, float, float], upper_open: bool) -> None:
    lo, hi, step = grid
    if step <= 0:
        raise ConfigError("grid step must be positive")
    if lo > hi:
        raise ConfigError(f"grid start {lo} exceeds grid end {hi}")
    if upper_open and not (0.0 <= lo and hi < 1.0):
        raise ConfigError(f"threshold grid must lie within [0, 1), got {grid}")


@dataclass(frozen=True)
class FilterPolicy:
    """Confidence threshold ``t`` in [0, 1), or None to disable filtering."""

    threshold: float | None = None
    grid: tuple[float, float, float] = (0.0, 0.9, 0.1)

    def __post_init__(self):
        if self.threshold is not None and not 0.0 <= self.threshold < 1.0:
            raise ConfigError(f"threshold must lie in [0, 1), got {self.threshold}")
        _check_grid(self.grid, upper_open=True)

    @property
    def is_off(self) -> bool:
        return self.threshold is None

    @classmethod
    def off(cls, grid: tuple[float, float, float] = (0.0, 0.9, 0.1)) -> "FilterPolicy":
        return cls(threshold=None, grid=grid)

    @classmethod
    def at(cls, threshold: float,
           grid: tuple[float, float, float] = (0.0, 0.9, 0.1)) -> "FilterPolicy":
        return cls(threshold=threshold, grid=grid)


@dataclass(frozen=True)
class GenerationQuota:
    """Target sample counts per class plus the rejection-attempt budget."""

    per_class: tuple[int, ...]
    max_attempt_factor: int = 200

    def __post_init__(self):
        per_class = tuple(int(c) for c in self.per_class)
        if any(c < 0 for c in per_class):
            raise ConfigError("per-class quotas must be non-negative")
        if sum(per_class) <= 0:
            raise ConfigError("total quota must be positive")
        if self.max_attempt_factor < 1:
            raise ConfigError("max_attempt_factor must be at least 1")
        object.__setattr__(self, "per_class", per_class)

    @classmethod
    def from_dataset(cls, dataset: Dataset, max_attempt_factor: int = 200) -> "GenerationQuota":
        """Quota matching the per-class counts of a (real) training set."""
        return cls(per_class=tuple(int(c) for c in dataset.class_counts()),
                   max_attempt_factor=max_attempt_factor)

    @property
    def total(self) -> int:
        return sum(self.per_class)


def _grid_values(grid: tuple[float, float, float]) -> list[float]:
    lo, hi, step = grid
    n_steps = int(np.floor((hi - lo) / step + 1e-9))
    return [lo + i * step for i in range(n_steps + 1)]


def threshold_grid(policy: FilterPolicy) -> list[float]:
    """[t0, t0+step, ..., tf], endpoints included within 1e-12."""
    return _grid_values(policy.grid)


def _accept_mask(features: np.ndarray, label: int,
                 oracle: ProbabilisticClassifier, threshold: float) -> np.ndarray:
    proba = oracle.predict_proba(features)
    predicted = np.argmax(proba, axis=1)
    return (predicted == label) & (proba[:, label] >= threshold)


def passes_filter(features: np.ndarray, label: int,
                  oracle: ProbabilisticClassifier, threshold: float) -> bool:
    """True iff the oracle predicts ``label`` and assigns it confidence >= t.

    Confidence is the probability the oracle assigns to the conditioning
    label; the comparison is inclusive.
    """
    if not 0.0 <= threshold < 1.0:
        raise ConfigError(f"threshold must lie in [0, 1), got {threshold}")
    row = np.asarray(features, dtype=np.float64).reshape(1, -1)
    if int(oracle.predict(row)[0]) != label:
        return False
    return float(oracle.predict_proba(row)[0, label]) >= threshold


def generate_filtered(sampler: Sampler, oracle: ProbabilisticClassifier | None,
                      policy: FilterPolicy, quota: GenerationQuota,
                      stddev: float, seed: int) -> Dataset:
    """Generate until every class quota is met by samples passing the filter.

    Candidates are consumed in generation order, so the retained set equals a
    brute-force scan of the same candidate stream. Raises
    :class:`StarvationError` once a class has burned
    ``max_attempt_factor * quota`` candidates without filling its quota.
    """
    if oracle is None and not policy.is_off:
        raise ConfigError("an oracle is required when filtering is enabled")

    num_classes = len(quota.per_class)
    feature_blocks: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    for c in range(num_classes):
        target = quota.per_class[c]
        if target == 0:
            continue
        batch_size = max(target, MIN_BATCH)
        accepted: list[np.ndarray] = []
        n_accepted = 0
        attempts = 0
        batch_index = 0
        while n_accepted < target:
            if attempts >= quota.max_attempt_factor * target:
                raise StarvationError(
                    class_index=c,
                    acceptance_rate=n_accepted / attempts if attempts else 0.0,
                    threshold=policy.threshold if policy.threshold is not None else 0.0,
                    attempts=attempts, quota=target,
                )
            candidates = sampler(c, batch_size,
                                 stddev, derive_seed(seed, "batch", c, batch_index))
            attempts += candidates.shape[0]
            batch_index += 1
            if policy.is_off:
                kept = candidates
            else:
                kept = candidates[_accept_mask(candidates, c, oracle, policy.threshold)]
            if kept.shape[0]:
                kept = kept[:target - n_accepted]
                accepted.append(kept)
                n_accepted += kept.shape[0]
        feature_blocks.append(np.vstack(accepted))
        labels.append(np.full(target, c, dtype=np.int64))

    return Dataset(np.vstack(feature_blocks), np.concatenate(labels), num_classes)
