"""Integrated-gradients attribution in latent space and input space, plus random baselines.

The attributed function is always the pre-softmax logit of the target
class. The path integral uses the midpoint Riemann rule with ``steps``
evaluation points between the baseline and the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import DimensionError
from .codec import CodecConfig, LatentGrid, encode_tensor, pad_for_encode
from .classifier import _wrap, logits_from_latent

DEFAULT_IG_STEPS = 64

LATENT_IG = "latent-ig"
INPUT_IG = "input-ig"
RANDOM_LATENT = "random-latent"
RANDOM_INPUT = "random-input"


@dataclass
class AttributionMap:
    scores: np.ndarray  # (T, L) for latent methods, (N,) for input methods
    target_class: int
    method: str
    ig_steps: int | None = None
    baseline: dict = field(default_factory=dict)


def _midpoints(steps: int, dtype=np.float32) -> np.ndarray:
    return ((np.arange(steps, dtype=np.float64) + 0.5) / steps).astype(dtype)


def integrated_gradients_latent(
    z: LatentGrid,
    baseline: LatentGrid,
    params: dict,
    target: int,
    steps: int = DEFAULT_IG_STEPS,
) -> AttributionMap:
    """IG of the target logit w.r.t. the T x L latent grid."""
    if z.values.shape != baseline.values.shape:
        raise DimensionError(
            f"latent/baseline shape mismatch: {z.values.shape} vs {baseline.values.shape}"
        )
    if steps < 1:
        raise ValueError("steps must be >= 1")
    delta = z.values - baseline.values
    alphas = _midpoints(steps)
    path = baseline.values[None, :, :] + alphas[:, None, None] * delta[None, :, :]
    zt = ad.Tensor(path, requires_grad=True)
    pt = _wrap(params, False)
    logits = logits_from_latent(zt, pt)
    onehot = np.zeros((params["w2"].shape[1], 1), dtype=np.float32)
    onehot[target, 0] = 1.0
    ad.tsum(ad.matmul(logits, ad.Tensor(onehot))).backward()
    avg_grad = zt.grad.mean(axis=0)
    return AttributionMap(
        scores=(delta * avg_grad).astype(np.float32),
        target_class=int(target),
        method=LATENT_IG,
        ig_steps=steps,
        baseline={"kind": "latent"},
    )


def integrated_gradients_input(
    x: np.ndarray,
    baseline: np.ndarray,
    codec_params: dict,
    codec_config: CodecConfig,
    cls_params: dict,
    target: int,
    steps: int = DEFAULT_IG_STEPS,
    chunk: int = 32,
) -> AttributionMap:
    """IG of the target logit w.r.t. the waveform, through encoder + head."""
    x = np.asarray(x, dtype=np.float32).reshape(-1)
    baseline = np.asarray(baseline, dtype=np.float32).reshape(-1)
    if x.shape != baseline.shape:
        raise DimensionError(f"input/baseline length mismatch: {x.shape} vs {baseline.shape}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    n = x.shape[0]
    xp = pad_for_encode(x, codec_config)
    bp = pad_for_encode(baseline, codec_config)
    delta = xp - bp
    cpt = _wrap(codec_params, False)
    hpt = _wrap(cls_params, False)
    onehot = np.zeros((cls_params["w2"].shape[1], 1), dtype=np.float32)
    onehot[target, 0] = 1.0
    grad_sum = np.zeros_like(xp)
    alphas = _midpoints(steps)
    for start in range(0, steps, chunk):
        a = alphas[start : start + chunk]
        pts = bp[None, :] + a[:, None] * delta[None, :]
        xt = ad.Tensor(pts[:, None, :], requires_grad=True)
        zt = encode_tensor(xt, cpt, codec_config)  # (b, L, T)
        logits = logits_from_latent(ad.transpose(zt, (0, 2, 1)), hpt)
        ad.tsum(ad.matmul(logits, ad.Tensor(onehot))).backward()
        grad_sum += xt.grad[:, 0, :].sum(axis=0)
    avg_grad = grad_sum / steps
    scores = (delta * avg_grad)[:n]
    return AttributionMap(
        scores=scores.astype(np.float32),
        target_class=int(target),
        method=INPUT_IG,
        ig_steps=steps,
        baseline={"kind": "input-noise"},
    )


def random_attribution(shape, seed: int, method: str = RANDOM_LATENT) -> AttributionMap:
    """Seeded i.i.d. uniform scores; top-ratio of it is a uniform random subset."""
    rng = np.random.default_rng(seed)
    scores = rng.random(size=shape).astype(np.float32)
    return AttributionMap(scores=scores, target_class=-1, method=method, baseline={"seed": seed})


def target_logit_latent(values: np.ndarray, params: dict, target: int) -> float:
    """Target-class logit of the head at one (T, L) latent; completeness oracle hook."""
    from .classifier import _logits_np

    return float(_logits_np(values[None, :, :].astype(np.float32), params)[0, target])


def target_logit_input(
    x: np.ndarray, codec_params: dict, codec_config: CodecConfig, cls_params: dict, target: int
) -> float:
    """Target-class logit of head(encoder(x)); completeness oracle hook."""
    from .codec import encode_batch
    from .classifier import _logits_np

    z = encode_batch(np.asarray(x, dtype=np.float32)[None, :], codec_params, codec_config)
    return float(_logits_np(z, cls_params)[0, target])
