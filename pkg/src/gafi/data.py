"""Dataset representation, synthetic benchmarks, CSV ingestion, splitting,
and normalization.

A :class:`Dataset` is an immutable bundle of float64 feature vectors and
integer class labels. All constructors are pure functions of their arguments
including the seed, and datasets are safe to share read-only across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, IngestError, SplitError
from .seeding import dataset_fingerprint

__all__ = [
    "LabeledSample",
    "Dataset",
    "SplitSpec",
    "NormalizationStats",
    "make_blobs",
    "make_rings",
    "load_csv",
    "write_csv",
    "split",
    "normalize",
]

#: Variance floor applied before division when standardizing features.
VARIANCE_EPSILON = 1e-12


class LabeledSample(NamedTuple):
    features: np.ndarray
    label: int


class Dataset:
    """Ordered collection of labeled feature vectors.

    Parameters
    ----------
    features : array of shape (n_samples, feature_dim), coerced to float64
    labels : array of shape (n_samples,), class indices in [0, num_classes)
    num_classes : number of classes the labels are drawn from
    """

    __slots__ = ("features", "labels", "num_classes")

    def __init__(self, features, labels, num_classes: int):
        feats = np.ascontiguousarray(features, dtype=np.float64)
        labs = np.ascontiguousarray(labels, dtype=np.int64)
        if feats.ndim != 2:
            raise ConfigError(f"features must be 2-D, got shape {feats.shape}")
        if labs.ndim != 1 or labs.shape[0] != feats.shape[0]:
            raise ConfigError("labels must be 1-D and match the number of feature rows")
        if num_classes < 1:
            raise ConfigError("num_classes must be positive")
        if labs.size and (labs.min() < 0 or labs.max() >= num_classes):
            raise ConfigError(
                f"labels must lie in [0, {num_classes}), got range "
                f"[{labs.min()}, {labs.max()}]"
            )
        feats.flags.writeable = False
        labs.flags.writeable = False
        self.features = feats
        self.labels = labs
        self.num_classes = int(num_classes)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]

    def __iter__(self) -> Iterator[LabeledSample]:
        for i in range(len(self)):
            yield LabeledSample(self.features[i], int(self.labels[i]))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)

    def fingerprint(self) -> str:
        return dataset_fingerprint(self.features, self.labels)

    def __repr__(self) -> str:
        return (f"Dataset(n={len(self)}, num_classes={self.num_classes}, "
                f"feature_dim={self.feature_dim})")


@dataclass(frozen=True)
class SplitSpec:
    """Stratified train/test split parameters."""

    train_fraction: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(
                f"train_fraction must lie strictly in (0, 1), got {self.train_fraction}"
            )


def make_blobs(classes: int, per_class: int, centers: Sequence[Sequence[float]],
               spreads: Sequence[float], seed: int) -> Dataset:
    """Isotropic Gaussian clusters, one per class.

    Class ``c`` is drawn from ``N(centers[c], spreads[c]^2 * I)``. Deterministic
    given the seed.
    """
    if len(centers) != classes or len(spreads) != classes:
        raise ConfigError(
            f"centers ({len(centers)}) and spreads ({len(spreads)}) must both "
            f"have length classes ({classes})"
        )
    if per_class < 1:
        raise ConfigError("per_class must be at least 1")
    center_arr = np.asarray(centers, dtype=np.float64)
    if center_arr.ndim != 2:
        raise ConfigError("centers must all have the same dimension")
    spread_arr = np.asarray(spreads, dtype=np.float64)
    if np.any(spread_arr < 0):
        raise ConfigError("spreads must be non-negative")

    rng = np.random.default_rng(seed)
    dim = center_arr.shape[1]
    blocks = []
    for c in range(classes):
        noise = rng.standard_normal((per_class, dim))
        blocks.append(center_arr[c] + spread_arr[c] * noise)
    features = np.vstack(blocks)
    labels = np.repeat(np.arange(classes), per_class)
    return Dataset(features, labels, classes)


def make_rings(classes: int, per_class: int, radii: Sequence[float],
               noise: float, seed: int) -> Dataset:
    """Concentric 2-D rings, one radius per class.

    Class ``c`` is sampled at a uniform angle with radius
    ``radii[c] + N(0, noise^2)``. Deliberately non-Gaussian, so a
    single-Gaussian-per-class generator is misspecified on it.
    """
    if len(radii) != classes:
        raise ConfigError(f"radii must have length classes ({classes}), got {len(radii)}")
    radii_arr = np.asarray(radii, dtype=np.float64)
    if np.any(radii_arr <= 0):
        raise ConfigError("radii must be strictly positive")
    if np.any(np.diff(radii_arr) <= 0):
        raise ConfigError(f"radii must be strictly increasing, got {list(radii)}")
    if noise < 0:
        raise ConfigError("noise must be non-negative")
    if per_class < 1:
        raise ConfigError("per_class must be at least 1")

    rng = np.random.default_rng(seed)
    blocks = []
    for c in range(classes):
        theta = rng.uniform(0.0, 2.0 * np.pi, size=per_class)
        r = radii_arr[c] + noise * rng.standard_normal(per_class)
        blocks.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    features = np.vstack(blocks)
    labels = np.repeat(np.arange(classes), per_class)
    return Dataset(features, labels, classes)


def load_csv(path, num_classes: int, feature_dim: int) -> Dataset:
    """Read a header-free ``label,f1,...,fd`` CSV into a Dataset.

    Raises :class:`IngestError` naming the 1-based line number on any
    malformed row, out-of-range label, or wrong column count.
    """
    path = Path(path)
    features: list[list[float]] = []
    labels: list[int] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                raise IngestError(f"{path}: line {lineno}: empty row")
            parts = line.split(",")
            if len(parts) != feature_dim + 1:
                raise IngestError(
                    f"{path}: line {lineno}: expected {feature_dim + 1} columns, "
                    f"got {len(parts)}"
                )
            try:
                label = int(parts[0], 10)
            except ValueError:
                raise IngestError(
                    f"{path}: line {lineno}: label {parts[0]!r} is not an integer"
                ) from None
            if not 0 <= label < num_classes:
                raise IngestError(
                    f"{path}: line {lineno}: label {label} outside [0, {num_classes})"
                )
            try:
                row = [float(tok) for tok in parts[1:]]
            except ValueError:
                raise IngestError(
                    f"{path}: line {lineno}: non-numeric feature value"
                ) from None
            labels.append(label)
            features.append(row)
    if not features:
        raise IngestError(f"{path}: file contains no rows")
    return Dataset(np.asarray(features), np.asarray(labels), num_classes)


def write_csv(dataset: Dataset, path) -> None:
    """Write a Dataset in the ``label,f1,...,fd`` format.

    Floats use the shortest round-trip decimal representation, so
    ``write_csv(load_csv(f))`` is idempotent.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for i in range(len(dataset)):
            row = ",".join(repr(float(v)) for v in dataset.features[i])
            fh.write(f"{int(dataset.labels[i])},{row}\n")


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Stratified split: per class, floor(train_fraction * n_c) samples go to
    train, the rest to test; the within-class permutation is determined by
    ``spec.seed``.
    """
    if len(dataset) == 0:
        raise SplitError("cannot split an empty dataset")
    rng = np.random.default_rng(spec.seed)
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for c in range(dataset.num_classes):
        class_idx = np.flatnonzero(dataset.labels == c)
        if class_idx.size < 2:
            raise SplitError(
                f"class {c} has {class_idx.size} sample(s); need at least 2 to split"
            )
        perm = class_idx[rng.permutation(class_idx.size)]
        n_train = int(np.floor(spec.train_fraction * class_idx.size))
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    return dataset.subset(np.concatenate(train_idx)), dataset.subset(np.concatenate(test_idx))


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature affine map ``x -> (x - mean) / scale`` fit on a train set."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, dataset: Dataset) -> Dataset:
        return Dataset((dataset.features - self.mean) / self.scale,
                       dataset.labels, dataset.num_classes)


def normalize(train: Dataset, others: Sequence[Dataset] = ()) -> tuple[list[Dataset], NormalizationStats]:
    """Standardize features to zero mean / unit variance.

    The map is computed on ``train`` only and applied to ``train`` and every
    dataset in ``others``. Zero-variance features are clamped at
    ``VARIANCE_EPSILON`` before division, which maps a constant feature to
    all zeros.
    """
    if len(train) == 0:
        raise ConfigError("cannot normalize with an empty train set")
    mean = train.features.mean(axis=0)
    var = train.features.var(axis=0)
    scale = np.sqrt(np.maximum(var, VARIANCE_EPSILON))
    stats = NormalizationStats(mean=mean, scale=scale)
    return [stats.apply(ds) for ds in (train, *others)], stats
