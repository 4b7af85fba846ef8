"""Synthetic dataset sources: expansion-trick sampling, filtering, recycle
scheduling, and multi-generator ensembles behind one abstraction.

A :class:`DatasetSource` is a pure function of (epoch, base seed): realizing
the same epoch twice yields bit-identical datasets, which is what makes
sweeps parallelizable and reports reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigError
from .filtering import FilterPolicy, GenerationQuota, _grid_values, generate_filtered
from .models import GeneratorCheckpoint, checkpoint_fingerprint, make_sampler
from .models.classifiers import ProbabilisticClassifier, TrainingBudget, make_classifier
from .seeding import derive_seed

__all__ = [
    "NoisePolicy",
    "RecycleSchedule",
    "EnsembleSpec",
    "DatasetSource",
    "IdentitySource",
    "should_recycle",
    "stddev_grid",
    "realize",
    "train_with_recycle",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoisePolicy:
    """Latent-noise stddev ``s`` plus the sweep grid (s0, sf, step)."""

    stddev: float = 1.0
    grid: tuple[float, float, float] = (1.0, 2.0, 0.05)

    def __post_init__(self):
        if self.stddev < 0:
            raise ConfigError(f"stddev must be non-negative, got {self.stddev}")
        lo, hi, step = self.grid
        if step <= 0:
            raise ConfigError("grid step must be positive")
        if lo > hi:
            raise ConfigError(f"grid start {lo} exceeds grid end {hi}")


def stddev_grid(noise: NoisePolicy) -> list[float]:
    """[s0, s0+step, ..., sf], endpoints included within 1e-12."""
    return _grid_values(noise.grid)


@dataclass(frozen=True)
class RecycleSchedule:
    """Regenerate the synthetic dataset every ``period`` epochs; None = never."""

    period: int | None

    def __post_init__(self):
        if self.period is not None and self.period < 1:
            raise ConfigError("recycle period must be at least 1")

    @property
    def is_static(self) -> bool:
        return self.period is None

    @classmethod
    def static(cls) -> "RecycleSchedule":
        return cls(period=None)

    @classmethod
    def every(cls, n: int) -> "RecycleSchedule":
        return cls(period=n)

    def label(self) -> str:
        return "static" if self.is_static else str(self.period)


def should_recycle(epoch: int, schedule: RecycleSchedule) -> bool:
    """Epoch 0 always generates; afterwards, epochs divisible by the period."""
    if epoch < 0:
        raise ConfigError("epoch must be non-negative")
    if epoch == 0:
        return True
    return not schedule.is_static and epoch % schedule.period == 0


@dataclass(frozen=True)
class EnsembleSpec:
    """K generator checkpoints sharing class/feature dimensions."""

    checkpoints: tuple[GeneratorCheckpoint, ...]

    def __post_init__(self):
        if len(self.checkpoints) < 1:
            raise ConfigError("an ensemble needs at least one checkpoint")
        first = self.checkpoints[0]
        for cp in self.checkpoints[1:]:
            if (cp.num_classes, cp.feature_dim) != (first.num_classes, first.feature_dim):
                raise ConfigError("ensemble members must share num_classes and feature_dim")

    @property
    def size(self) -> int:
        return len(self.checkpoints)


def _per_member(value, size: int, cls, what: str) -> tuple:
    if isinstance(value, cls):
        return (value,) * size
    members = tuple(value)
    if len(members) != size:
        raise ConfigError(f"need one {what} per ensemble member ({size}), got {len(members)}")
    return members


@dataclass(frozen=True)
class DatasetSource:
    """Everything needed to realize a synthetic training set for an epoch.

    ``noise`` and ``filter_policy`` may be single policies (shared by all
    ensemble members) or one per member, which is how the pipeline applies
    each repetition's own tuned hyperparameters to its member.
    """

    ensemble: EnsembleSpec
    noise: NoisePolicy | tuple[NoisePolicy, ...]
    filter_policy: FilterPolicy | tuple[FilterPolicy, ...]
    oracle: ProbabilisticClassifier | None
    quota: GenerationQuota
    base_seed: int

    def __post_init__(self):
        object.__setattr__(self, "noise",
                           _per_member(self.noise, self.ensemble.size, NoisePolicy, "noise policy"))
        object.__setattr__(self, "filter_policy",
                           _per_member(self.filter_policy, self.ensemble.size, FilterPolicy,
                                       "filter policy"))
        if len(self.quota.per_class) != self.ensemble.checkpoints[0].num_classes:
            raise ConfigError("quota classes must match the generator's num_classes")

    @property
    def num_classes(self) -> int:
        return self.ensemble.checkpoints[0].num_classes

    @property
    def feature_dim(self) -> int:
        return self.ensemble.checkpoints[0].feature_dim

    def reseeded(self, base_seed: int) -> "DatasetSource":
        return replace(self, base_seed=base_seed)

    def fingerprint_payload(self) -> dict:
        return {
            "kind": "ensemble",
            "checkpoints": [checkpoint_fingerprint(cp) for cp in self.ensemble.checkpoints],
            "stddev": [p.stddev for p in self.noise],
            "threshold": [p.threshold for p in self.filter_policy],
            "quota": list(self.quota.per_class),
            "base_seed": self.base_seed,
        }

    def realize(self, epoch: int) -> Dataset:
        dataset, _ = self.realize_with_counts(epoch)
        return dataset

    def realize_with_counts(self, epoch: int) -> tuple[Dataset, np.ndarray]:
        """Realize one epoch's dataset; also return the per-class member
        assignment counts, shape (num_classes, K), for ensemble audits."""
        k = self.ensemble.size
        seed_e = derive_seed(self.base_seed, "realize", epoch)
        counts = np.zeros((self.num_classes, k), dtype=np.int64)
        for c, target in enumerate(self.quota.per_class):
            if k == 1:
                counts[c, 0] = target
            elif target:
                rng = np.random.default_rng(derive_seed(seed_e, "assign", c))
                counts[c] = np.bincount(rng.integers(0, k, size=target), minlength=k)

        member_sets: list[Dataset | None] = []
        for m, cp in enumerate(self.ensemble.checkpoints):
            if counts[:, m].sum() == 0:
                member_sets.append(None)
                continue
            quota_m = GenerationQuota(per_class=tuple(int(v) for v in counts[:, m]),
                                      max_attempt_factor=self.quota.max_attempt_factor)
            member_sets.append(generate_filtered(
                make_sampler(cp), self.oracle, self.filter_policy[m], quota_m,
                self.noise[m].stddev, derive_seed(seed_e, "member", m)))

        # Assemble class-major, members in order within each class.
        features = []
        labels = []
        for c in range(self.num_classes):
            for ds in member_sets:
                if ds is None:
                    continue
                rows = ds.features[ds.labels == c]
                if rows.shape[0]:
                    features.append(rows)
                    labels.append(np.full(rows.shape[0], c, dtype=np.int64))
        dataset = Dataset(np.vstack(features), np.concatenate(labels), self.num_classes)
        logger.debug("realized dataset epoch=%d fingerprint=%s", epoch, dataset.fingerprint())
        return dataset, counts


class IdentitySource:
    """Replays a fixed dataset; the static stand-in used for real-data runs."""

    def __init__(self, dataset: Dataset):
        self.dataset = dataset

    @property
    def num_classes(self) -> int:
        return self.dataset.num_classes

    @property
    def feature_dim(self) -> int:
        return self.dataset.feature_dim

    def reseeded(self, base_seed: int) -> "IdentitySource":
        return self

    def fingerprint_payload(self) -> dict:
        return {"kind": "identity", "dataset": self.dataset.fingerprint()}

    def realize(self, epoch: int) -> Dataset:
        return self.dataset


def realize(source, epoch: int) -> Dataset:
    """Module-level alias for ``source.realize(epoch)``."""
    return source.realize(epoch)


def train_with_recycle(kind, budget: TrainingBudget, source, schedule: RecycleSchedule,
                       seed: int):
    """Run the classifier's SGD loop, replacing the training set via
    ``source.realize`` at every epoch the schedule marks for regeneration."""
    clf = make_classifier(kind, budget, source.num_classes, seed)
    clf.start_run(source.num_classes, source.feature_dim)
    current: Dataset | None = None
    for epoch in range(budget.epochs):
        try:
            if should_recycle(epoch, schedule):
                current = source.realize(epoch)
            clf.run_epoch(current.features, current.labels, epoch)
        except Exception as exc:
            exc.args = (f"epoch {epoch}: {exc}",) + exc.args[1:]
            raise
    return clf
