"""Classifier head on latent grids.

Each latent frame is embedded through an ELU layer, the embeddings are
pooled over time, and a 2-layer perceptron maps the pooled vector to
class logits. The per-frame nonlinearity matters: raw latent frames
oscillate with the waveform and average out to near zero, so pooling
must happen after rectification.

Pooling is configurable: plain time mean, or mean plus max. The max
term makes short, localized events visible to the head — the mean of a
100 ms burst over a 1 s clip is tiny, its max is not — at the cost of
being much more robust to cell substitution. The chosen mode is stored
in the checkpoint as a constant ``pool_max`` gate so inference needs
only the parameter dict. The encoder stays frozen; this module only
ever sees latents.

Training can optionally substitute random latent cells of one anchor
class with a supplied base grid (see ``train_classifier``); the head
then learns that base-valued cells carry no class evidence, which is
what makes explanation *removal* fall back to the anchor class instead
of an arbitrary one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DimensionError
from .checkpoint import Checkpoint
from .codec import LatentGrid
from .optim import Adam, AdamConfig


@dataclass
class ClassifierConfig:
    num_classes: int
    latent_channels: int = 32
    hidden: int = 64
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 150
    pooling: str = "mean"  # "mean" or "mean-max"
    # anchor-class substitution augmentation; active only when train_classifier
    # is also given a substitution base grid
    anchor_class: int | None = None
    substitution_max_ratio: float = 0.5

    def __post_init__(self):
        if self.pooling not in ("mean", "mean-max"):
            raise ValueError(f"pooling must be 'mean' or 'mean-max', got {self.pooling!r}")

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "latent_channels": self.latent_channels,
            "hidden": self.hidden,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "pooling": self.pooling,
            "anchor_class": self.anchor_class,
            "substitution_max_ratio": self.substitution_max_ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierConfig":
        return cls(**d)


def init_classifier_params(config: ClassifierConfig, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    l, h, c = config.latent_channels, config.hidden, config.num_classes
    bl = np.sqrt(1.0 / l)
    bh = np.sqrt(1.0 / h)
    return {
        "w0": rng.uniform(-bl, bl, size=(l, h)).astype(np.float32),
        "b0": np.zeros(h, dtype=np.float32),
        "w1": rng.uniform(-bh, bh, size=(h, h)).astype(np.float32),
        "b1": np.zeros(h, dtype=np.float32),
        "w2": rng.uniform(-bh, bh, size=(h, c)).astype(np.float32),
        "b2": np.zeros(c, dtype=np.float32),
        # constant gate, not trained: 1.0 adds the max-pool term
        "pool_max": np.asarray([1.0 if config.pooling == "mean-max" else 0.0],
                               dtype=np.float32),
    }


def _wrap(params: dict, requires_grad: bool) -> dict:
    return {k: ad.Tensor(v, requires_grad=requires_grad) for k, v in params.items()}


def logits_from_latent(z: ad.Tensor, pt: dict) -> ad.Tensor:
    """Differentiable head on a (B, T, L) latent tensor; returns (B, C) logits."""
    b, t, l = z.data.shape
    h = pt["w0"].data.shape[1]
    frames = ad.reshape(z, (b * t, l))
    emb = ad.reshape(
        ad.elu(ad.add(ad.matmul(frames, pt["w0"]), ad.reshape(pt["b0"], (1, -1)))), (b, t, h)
    )
    pooled = ad.tmean(emb, axis=1)
    gate = float(pt["pool_max"].data[0]) if "pool_max" in pt else 0.0
    if gate:
        pooled = ad.add(pooled, ad.scale(ad.tmax(emb, axis=1), gate))
    g = ad.elu(ad.add(ad.matmul(pooled, pt["w1"]), ad.reshape(pt["b1"], (1, -1))))
    return ad.add(ad.matmul(g, pt["w2"]), ad.reshape(pt["b2"], (1, -1)))


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0))).astype(np.float32)


def _logits_np(latents: np.ndarray, params: dict) -> np.ndarray:
    emb = _elu(latents @ params["w0"] + params["b0"])
    pooled = emb.mean(axis=1)
    gate = float(params["pool_max"][0]) if "pool_max" in params else 0.0
    if gate:
        pooled = pooled + gate * emb.max(axis=1)
    g = _elu(pooled @ params["w1"] + params["b1"])
    return g @ params["w2"] + params["b2"]


def classify(z: LatentGrid, params: dict) -> np.ndarray:
    """Softmax probabilities (C,) for one latent grid."""
    if z.channels != params["w0"].shape[0]:
        raise DimensionError(
            f"latent has {z.channels} channels, head expects {params['w0'].shape[0]}"
        )
    logits = _logits_np(z.values[None, :, :], params)
    return ad.softmax(logits, axis=1)[0]


def predict_batch(latents: np.ndarray, params: dict) -> np.ndarray:
    """Argmax class indices for (B, T, L) latents."""
    return _logits_np(latents, params).argmax(axis=1)


def train_classifier(
    latents: np.ndarray,
    labels: np.ndarray,
    config: ClassifierConfig,
    seed: int = 0,
    substitution_base: np.ndarray | None = None,
) -> Checkpoint:
    """Train the head on (M, T, L) latents with integer labels; encoder untouched.

    When ``substitution_base`` (a (T, L) grid) is given and the config names
    an ``anchor_class``, each anchor-class sample in a batch has a random
    fraction (uniform up to ``substitution_max_ratio``) of its cells replaced
    by the base values. Anchor samples stay anchor-labeled under base
    substitution, so the head treats base-valued cells as evidence-free.
    """
    latents = np.asarray(latents, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    if latents.shape[0] == 0:
        raise ValueError("training set must be nonempty")
    if np.unique(labels).size < 2:
        raise ValueError("training set must contain at least 2 classes")
    augment = substitution_base is not None and config.anchor_class is not None
    if augment and substitution_base.shape != latents.shape[1:]:
        raise DimensionError(
            f"substitution base shape {substitution_base.shape} != latent shape {latents.shape[1:]}"
        )
    m = latents.shape[0]
    cells = latents.shape[1] * latents.shape[2]
    base_flat = substitution_base.reshape(-1) if augment else None
    rng = np.random.default_rng(seed)
    pt = _wrap(init_classifier_params(config, seed), True)
    opt = Adam(pt, AdamConfig(lr=config.lr))
    final_loss = float("nan")
    for _epoch in range(config.epochs):
        perm = rng.permutation(m)
        total, count = 0.0, 0
        for start in range(0, m, config.batch_size):
            idx = perm[start : start + config.batch_size]
            batch = latents[idx]
            if augment:
                batch = batch.copy()
                for j, gi in enumerate(idx):
                    if labels[gi] != config.anchor_class:
                        continue
                    n_sub = int(np.floor(rng.uniform(0, config.substitution_max_ratio)
                                         * cells + 0.5))
                    if n_sub:
                        flat = rng.choice(cells, size=n_sub, replace=False)
                        batch[j].reshape(-1)[flat] = base_flat[flat]
            logits = logits_from_latent(ad.Tensor(batch), pt)
            loss = ad.softmax_cross_entropy(logits, labels[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.data) * len(idx)
            count += len(idx)
        final_loss = total / count
    return Checkpoint(
        kind="classifier",
        config=config.to_dict(),
        params={k: t.data for k, t in pt.items()},
        metadata={"seed": seed, "epochs": config.epochs, "final_loss": final_loss},
    )


def evaluate_accuracy(latents: np.ndarray, labels: np.ndarray, params: dict) -> float:
    """Fraction of argmax predictions matching labels."""
    if latents.shape[0] == 0:
        raise ValueError("evaluation set must be nonempty")
    preds = predict_batch(latents, params)
    return float(np.mean(preds == np.asarray(labels)))
