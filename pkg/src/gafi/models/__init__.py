"""Desk-scale conditional generators, classifiers, and latent sampling."""

from .checkpoint import (
    GeneratorCheckpoint,
    checkpoint_fingerprint,
    checkpoint_from_bytes,
    checkpoint_to_bytes,
    load_checkpoint,
    save_checkpoint,
)
from .classifiers import (
    MlpClassifier,
    MlpKind,
    ProbabilisticClassifier,
    SoftmaxClassifier,
    TrainingBudget,
    fit_classifier,
    make_classifier,
)
from .gan import TinyGanGenerator, fit_tiny_gan, gan_sample
from .gmm import GmmGenerator, fit_gmm_generator, gmm_log_likelihood, gmm_sample
from .latent import NoiseSource, sample_latent

__all__ = [
    "GeneratorCheckpoint",
    "checkpoint_fingerprint",
    "checkpoint_from_bytes",
    "checkpoint_to_bytes",
    "load_checkpoint",
    "save_checkpoint",
    "MlpClassifier",
    "MlpKind",
    "ProbabilisticClassifier",
    "SoftmaxClassifier",
    "TrainingBudget",
    "fit_classifier",
    "make_classifier",
    "TinyGanGenerator",
    "fit_tiny_gan",
    "gan_sample",
    "GmmGenerator",
    "fit_gmm_generator",
    "gmm_log_likelihood",
    "gmm_sample",
    "NoiseSource",
    "sample_latent",
    "make_sampler",
]


def make_sampler(checkpoint: GeneratorCheckpoint):
    """Bind a checkpoint to the (label, count, stddev, seed) sampler signature."""
    if checkpoint.model_kind == "gmm":
        fn = gmm_sample
    elif checkpoint.model_kind == "tiny-gan":
        fn = gan_sample
    else:  # pragma: no cover - kinds are validated at construction
        raise ValueError(f"unknown model kind {checkpoint.model_kind!r}")

    def sampler(label: int, count: int, stddev: float, seed: int):
        return fn(checkpoint, label, count, stddev, seed)

    return sampler
