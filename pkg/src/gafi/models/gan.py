"""Tiny conditional GAN for low-dimensional data.

Generator: (latent z | one-hot class) -> tanh hidden layer -> linear output.
Discriminator: (features | one-hot class) -> leaky-relu hidden layer -> logit.
Both train with the non-saturating GAN objective under momentum SGD; every
gradient comes from the package's reverse-mode differentiation. Divergence is
allowed by contract: later checkpoints may be worse than earlier ones, which
is exactly why checkpoint optimization exists.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..data import Dataset
from ..errors import ConfigError, TrainingError
from ..seeding import derive_seed, epoch_order, sample_keys
from . import autodiff as ad
from .checkpoint import GeneratorCheckpoint
from .latent import NoiseSource, sample_latent

__all__ = ["TinyGanGenerator", "fit_tiny_gan", "gan_sample", "gan_forward"]

LEAKY_SLOPE = 0.2


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def gan_forward(params, z: np.ndarray, one_hot: np.ndarray) -> np.ndarray:
    """Straight-line generator forward pass from raw parameter arrays."""
    x = np.hstack([z, one_hot])
    hidden = np.tanh(x @ params["g_w1"] + params["g_b1"])
    return hidden @ params["g_w2"] + params["g_b2"]


class TinyGanGenerator(BaseEstimator):
    """Conditional GAN with one checkpoint per epoch plus the initialization.

    Fitted attributes: ``checkpoints_`` (generator snapshots),
    ``disc_params_`` (final discriminator), and ``history_`` with the
    per-epoch discriminator loss on real data (index 0 = before training).
    """

    def __init__(self, latent_dim: int = 4, hidden_width: int = 32,
                 epochs: int = 30, seed: int = 0, batch_size: int = 32,
                 lr: float = 0.02, momentum: float = 0.5, disc_steps: int = 4):
        self.latent_dim = latent_dim
        self.hidden_width = hidden_width
        self.epochs = epochs
        self.seed = seed
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.disc_steps = disc_steps

    def fit(self, X, y, num_classes: int | None = None) -> "TinyGanGenerator":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if X.shape[0] == 0:
            raise TrainingError("cannot fit a GAN on an empty training set")
        C = int(num_classes if num_classes is not None else y.max() + 1)
        n, d = X.shape
        h, zdim = self.hidden_width, self.latent_dim

        rng = np.random.default_rng(derive_seed(self.seed, "gan-init"))
        g_w1 = ad.Tensor(rng.standard_normal((zdim + C, h)) / np.sqrt(zdim + C),
                         requires_grad=True)
        g_b1 = ad.Tensor(np.zeros(h), requires_grad=True)
        g_w2 = ad.Tensor(rng.standard_normal((h, d)) / np.sqrt(h), requires_grad=True)
        g_b2 = ad.Tensor(np.zeros(d), requires_grad=True)
        d_w1 = ad.Tensor(rng.standard_normal((d + C, h)) / np.sqrt(d + C),
                         requires_grad=True)
        d_b1 = ad.Tensor(np.zeros(h), requires_grad=True)
        # zero output layer: the discriminator starts exactly undecided
        # (real-data loss log 2), so its learning signal is visible in the
        # recorded trajectory
        d_w2 = ad.Tensor(np.zeros((h, 1)), requires_grad=True)
        d_b2 = ad.Tensor(np.zeros(1), requires_grad=True)

        gen_params = [g_w1, g_b1, g_w2, g_b2]
        disc_params = [d_w1, d_b1, d_w2, d_b2]
        opt_g = ad.MomentumSgd(gen_params, momentum=self.momentum)
        opt_d = ad.MomentumSgd(disc_params, momentum=self.momentum)

        def disc_logits(feats: ad.Tensor, oh: np.ndarray) -> ad.Tensor:
            x = concat(feats, oh)
            hidden = ad.leaky_relu(ad.add(ad.matmul(x, d_w1), d_b1), LEAKY_SLOPE)
            return ad.add(ad.matmul(hidden, d_w2), d_b2)

        def concat(feats: ad.Tensor, oh: np.ndarray) -> ad.Tensor:
            return ad.concat_cols(feats, oh)

        def gen_batch(z: np.ndarray, oh: np.ndarray) -> ad.Tensor:
            x = ad.Tensor(np.hstack([z, oh]))
            hidden = ad.tanh(ad.add(ad.matmul(x, g_w1), g_b1))
            return ad.add(ad.matmul(hidden, g_w2), g_b2)

        def snapshot(epoch: int) -> GeneratorCheckpoint:
            return GeneratorCheckpoint(
                epoch=epoch, model_kind="tiny-gan", num_classes=C, feature_dim=d,
                latent_dim=zdim,
                params={"g_w1": g_w1.data.copy(), "g_b1": g_b1.data.copy(),
                        "g_w2": g_w2.data.copy(), "g_b2": g_b2.data.copy()},
            )

        def real_loss() -> float:
            logits = disc_logits(ad.Tensor(X), _one_hot(y, C))
            return float(ad.bce_logits(logits, np.ones(n)).data)

        keys = sample_keys(X, y)
        noise_rng = np.random.default_rng(derive_seed(self.seed, "gan-noise"))
        checkpoints = [snapshot(0)]
        history = [real_loss()]
        source = NoiseSource(dim=zdim, stddev=1.0)

        for epoch in range(1, self.epochs + 1):
            order = epoch_order(keys, self.seed, epoch)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                Xb, yb = X[idx], y[idx]
                oh = _one_hot(yb, C)
                b = idx.size

                # Discriminator steps (several per generator step); fakes are
                # held constant during each.
                for _ in range(self.disc_steps):
                    z = source.stddev * noise_rng.standard_normal((b, zdim))
                    fake = gan_forward(
                        {"g_w1": g_w1.data, "g_b1": g_b1.data,
                         "g_w2": g_w2.data, "g_b2": g_b2.data}, z, oh)
                    opt_d.zero_grad()
                    loss_real = ad.bce_logits(disc_logits(ad.Tensor(Xb), oh), np.ones(b))
                    loss_fake = ad.bce_logits(disc_logits(ad.Tensor(fake), oh), np.zeros(b))
                    d_loss = ad.add(loss_real, loss_fake)
                    d_loss.backward()
                    opt_d.step(self.lr)

                # Generator step: non-saturating objective through the
                # discriminator; only generator parameters are updated.
                z2 = source.stddev * noise_rng.standard_normal((b, zdim))
                opt_g.zero_grad()
                opt_d.zero_grad()
                g_loss = ad.bce_logits(disc_logits(gen_batch(z2, oh), oh), np.ones(b))
                g_loss.backward()
                opt_g.step(self.lr)

            checkpoints.append(snapshot(epoch))
            history.append(real_loss())

        self.checkpoints_ = checkpoints
        self.history_ = history
        self.disc_params_ = {"d_w1": d_w1.data.copy(), "d_b1": d_b1.data.copy(),
                             "d_w2": d_w2.data.copy(), "d_b2": d_b2.data.copy()}
        self.num_classes_ = C
        self.feature_dim_ = d
        return self

    def sample(self, label: int, count: int, stddev: float = 1.0, seed: int = 0,
               epoch: int | None = None) -> np.ndarray:
        cp = self.checkpoints_[-1 if epoch is None else epoch]
        return gan_sample(cp, label, count, stddev, seed)


def fit_tiny_gan(train: Dataset, latent_dim: int, hidden_width: int,
                 epochs: int, seed: int) -> list[GeneratorCheckpoint]:
    """Train the tiny conditional GAN and return its checkpoint sequence."""
    gan = TinyGanGenerator(latent_dim=latent_dim, hidden_width=hidden_width,
                           epochs=epochs, seed=seed)
    gan.fit(train.features, train.labels, num_classes=train.num_classes)
    return gan.checkpoints_


def gan_sample(checkpoint: GeneratorCheckpoint, label: int, count: int,
               stddev: float = 1.0, seed: int = 0) -> np.ndarray:
    """Forward the generator on latent noise drawn at the requested stddev."""
    if checkpoint.model_kind != "tiny-gan":
        raise ValueError(f"expected a tiny-gan checkpoint, got {checkpoint.model_kind!r}")
    if not 0 <= label < checkpoint.num_classes:
        raise ValueError(f"class index {label} outside [0, {checkpoint.num_classes})")
    z = sample_latent(NoiseSource(dim=checkpoint.latent_dim, stddev=stddev),
                      count, seed)
    one_hot = _one_hot(np.full(count, label, dtype=np.int64), checkpoint.num_classes)
    return gan_forward(checkpoint.params, z, one_hot)
