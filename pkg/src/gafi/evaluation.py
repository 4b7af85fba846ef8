"""Classification Accuracy Score: train on a synthetic source, score on real
held-out data."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError
from .models.classifiers import TrainingBudget
from .seeding import config_fingerprint, derive_seed
from .synthesis import IdentitySource, RecycleSchedule, train_with_recycle

__all__ = ["CasConfig", "CasResult", "compute_cas", "real_accuracy", "accuracy"]


@dataclass(frozen=True)
class CasConfig:
    """Evaluation protocol: classifier kind, budget, and one seed per repeat."""

    classifier_kind: object
    budget: TrainingBudget
    seeds: tuple[int, ...]

    def __post_init__(self):
        if len(self.seeds) < 1:
            raise ConfigError("CAS evaluation needs at least one seed")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def repeats(self) -> int:
        return len(self.seeds)


@dataclass(frozen=True)
class CasResult:
    """One CAS measurement: per-seed accuracies, their mean, and the full
    configuration fingerprint that reproduces them."""

    cas_mean: float
    cas_per_seed: tuple[float, ...]
    fingerprint: str
    wall_time: float

    @classmethod
    def from_scores(cls, scores, fingerprint: str, wall_time: float) -> "CasResult":
        per_seed = tuple(float(s) for s in scores)
        return cls(cas_mean=float(np.mean(per_seed)), cas_per_seed=per_seed,
                   fingerprint=fingerprint, wall_time=wall_time)

    def to_dict(self) -> dict:
        return {"cas_mean": self.cas_mean, "cas_per_seed": list(self.cas_per_seed),
                "fingerprint": self.fingerprint, "wall_time": self.wall_time}

    @classmethod
    def from_dict(cls, d: dict) -> "CasResult":
        return cls(cas_mean=d["cas_mean"], cas_per_seed=tuple(d["cas_per_seed"]),
                   fingerprint=d["fingerprint"], wall_time=d["wall_time"])


def accuracy(classifier, dataset: Dataset) -> float:
    """Top-1 accuracy: matching predictions divided by dataset size."""
    predictions = classifier.predict(dataset.features)
    return float(np.mean(predictions == dataset.labels))


def _evaluation_fingerprint(source, schedule: RecycleSchedule, real_test: Dataset,
                            config: CasConfig) -> str:
    kind = config.classifier_kind
    return config_fingerprint({
        "source": source.fingerprint_payload(),
        "schedule": schedule.label(),
        "test": real_test.fingerprint(),
        "classifier": kind if isinstance(kind, str) else repr(kind),
        "budget": asdict(config.budget),
        "seeds": list(config.seeds),
    })


def compute_cas(source, schedule: RecycleSchedule, real_test: Dataset,
                config: CasConfig) -> CasResult:
    """Train one classifier per seed on the synthetic source and measure the
    mean top-1 accuracy on the real test set.

    Each seed reseeds the source (so repeats draw independent synthetic data)
    and seeds the classifier; equal seeds therefore give identical entries.
    A failed seed aborts the whole evaluation.
    """
    if len(real_test) == 0:
        raise ConfigError("real_test must be non-empty")
    if real_test.num_classes > source.num_classes:
        raise ConfigError("real_test classes must be a subset of the source classes")
    started = time.perf_counter()
    scores = []
    for seed in config.seeds:
        run_source = source.reseeded(
            derive_seed(getattr(source, "base_seed", 0), "cas-run", seed))
        clf = train_with_recycle(config.classifier_kind, config.budget,
                                 run_source, schedule, seed)
        scores.append(accuracy(clf, real_test))
    fingerprint = _evaluation_fingerprint(source, schedule, real_test, config)
    return CasResult.from_scores(scores, fingerprint, time.perf_counter() - started)


def real_accuracy(real_train: Dataset, real_test: Dataset,
                  config: CasConfig) -> CasResult:
    """The real-data reference: same protocol with the real training set as a
    static source."""
    return compute_cas(IdentitySource(real_train), RecycleSchedule.static(),
                       real_test, config)
