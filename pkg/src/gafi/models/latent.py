"""Latent noise sampling, including the widened-stddev draw used by the
expansion trick."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

__all__ = ["NoiseSource", "sample_latent"]


@dataclass(frozen=True)
class NoiseSource:
    """Isotropic normal latent distribution N(0, stddev^2 I) in ``dim`` dimensions.

    The training-time default is stddev 1.0; sampling with a larger stddev
    pushes the generator into regions it visited rarely during training.
    """

    dim: int
    stddev: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("latent dim must be positive")
        if self.stddev < 0:
            raise ConfigError("latent stddev must be non-negative")


def sample_latent(source: NoiseSource, count: int, seed: int) -> np.ndarray:
    """Draw a (count, dim) matrix of independent N(0, stddev^2) entries."""
    if count < 0:
        raise ConfigError("count must be non-negative")
    rng = np.random.default_rng(seed)
    return source.stddev * rng.standard_normal((count, source.dim))
