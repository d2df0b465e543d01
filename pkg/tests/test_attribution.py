"""Integrated-gradients properties: closed form on affine heads, completeness, stability."""

import numpy as np
import pytest

from latentexplain.attribution import (
    INPUT_IG,
    LATENT_IG,
    RANDOM_INPUT,
    integrated_gradients_input,
    integrated_gradients_latent,
    random_attribution,
    target_logit_input,
    target_logit_latent,
)
from latentexplain.autodiff import DimensionError
from latentexplain.classifier import predict_batch
from latentexplain.codec import LatentGrid


def affine_head_params(l=6, h=5, c=3, seed=0):
    """Head parameters whose pre-activations stay positive on bounded inputs.

    ELU is the identity on positives and mean pooling is linear (no
    ``pool_max`` gate here), so within that region the whole head is
    affine in the latent and IG has a closed form independent of the
    step count: att = (z - z') * dF, sum(att) = F(z) - F(z').
    """
    rng = np.random.default_rng(seed)
    return {
        "w0": rng.uniform(0.0, 0.05, (l, h)).astype(np.float32),
        "b0": np.full(h, 5.0, dtype=np.float32),
        "w1": rng.uniform(0.0, 0.05, (h, h)).astype(np.float32),
        "b1": np.full(h, 5.0, dtype=np.float32),
        "w2": rng.standard_normal((h, c)).astype(np.float32),
        "b2": np.zeros(c, dtype=np.float32),
    }


class TestAffineClosedForm:
    def test_step_count_irrelevant_and_exact(self):
        params = affine_head_params()
        rng = np.random.default_rng(1)
        z = LatentGrid(rng.uniform(-1, 1, (4, 6)).astype(np.float32))
        base = LatentGrid(rng.uniform(-1, 1, (4, 6)).astype(np.float32))
        maps = [
            integrated_gradients_latent(z, base, params, 1, steps=m).scores
            for m in (1, 8, 64)
        ]
        for other in maps[1:]:
            assert np.max(np.abs(maps[0] - other)) <= 1e-5
        dF = target_logit_latent(z.values, params, 1) - target_logit_latent(
            base.values, params, 1
        )
        assert abs(maps[0].sum() - dF) <= 1e-5

    def test_gradient_factor_matches_hand_computation(self):
        params = affine_head_params()
        rng = np.random.default_rng(2)
        z = LatentGrid(rng.uniform(-1, 1, (3, 6)).astype(np.float32))
        base = LatentGrid(np.zeros((3, 6), dtype=np.float32) + 0.1)
        att = integrated_gradients_latent(z, base, params, 0, steps=4)
        # affine region: dF/dz[t, l] = (w0 @ w1 @ w2[:, 0])[l] / T
        g = (params["w0"] @ params["w1"] @ params["w2"][:, 0]) / 3.0
        expected = (z.values - base.values) * g[None, :]
        assert np.max(np.abs(att.scores - expected)) <= 1e-5


class TestBasicProperties:
    def test_zero_path_zero_scores(self):
        params = affine_head_params()
        z = LatentGrid(np.full((4, 6), 0.3, dtype=np.float32))
        att = integrated_gradients_latent(z, z, params, 0, steps=16)
        assert np.all(att.scores == 0)

    def test_metadata(self):
        params = affine_head_params()
        z = LatentGrid(np.zeros((2, 6), dtype=np.float32))
        b = LatentGrid(np.ones((2, 6), dtype=np.float32))
        att = integrated_gradients_latent(z, b, params, 2, steps=7)
        assert att.method == LATENT_IG
        assert att.target_class == 2
        assert att.ig_steps == 7
        assert att.scores.shape == (2, 6)

    def test_shape_mismatch(self):
        params = affine_head_params()
        with pytest.raises(DimensionError):
            integrated_gradients_latent(
                LatentGrid(np.zeros((2, 6), dtype=np.float32)),
                LatentGrid(np.zeros((3, 6), dtype=np.float32)),
                params, 0,
            )

    def test_bad_steps(self):
        params = affine_head_params()
        z = LatentGrid(np.zeros((2, 6), dtype=np.float32))
        with pytest.raises(ValueError):
            integrated_gradients_latent(z, z, params, 0, steps=0)


class TestCompletenessOnTrainedModel:
    """|sum(att) - (F(x) - F(baseline))| <= 1% of |dF| + 1e-6 at 128 steps."""

    def test_latent_ig_fifty_samples(self, kw_data, kw_latents, cls_kw, models_kw):
        idx = kw_data.test_idx[:50]
        targets = predict_batch(kw_latents[idx], cls_kw.params)
        base = models_kw.base_latent
        for i, t in zip(idx, targets):
            att = integrated_gradients_latent(
                LatentGrid(kw_latents[i]), base, cls_kw.params, int(t), steps=128
            )
            dF = target_logit_latent(kw_latents[i], cls_kw.params, int(t)) - \
                target_logit_latent(base.values, cls_kw.params, int(t))
            assert abs(float(att.scores.sum()) - dF) <= 0.01 * abs(dF) + 1e-6

    def test_step_refinement_stable(self, kw_data, kw_latents, cls_kw, models_kw):
        i = kw_data.test_idx[0]
        t = int(predict_batch(kw_latents[i][None], cls_kw.params)[0])
        base = models_kw.base_latent
        s128 = float(integrated_gradients_latent(
            LatentGrid(kw_latents[i]), base, cls_kw.params, t, steps=128).scores.sum())
        s256 = float(integrated_gradients_latent(
            LatentGrid(kw_latents[i]), base, cls_kw.params, t, steps=256).scores.sum())
        assert abs(s256 - s128) < 0.005 * abs(s128)


class TestInputSpaceIG:
    def test_score_length_matches_waveform(self, kw_data, codec_kw, codec_config, cls_kw,
                                           models_kw):
        x = kw_data.clips[kw_data.test_idx[0]]
        att = integrated_gradients_input(
            x, models_kw.noise_clip.samples, codec_kw.params, codec_config,
            cls_kw.params, 0, steps=8,
        )
        assert att.scores.shape == (len(x),)
        assert att.method == INPUT_IG

    def test_completeness_through_encoder(self, kw_data, kw_latents, codec_kw, codec_config,
                                          cls_kw, models_kw):
        idx = kw_data.test_idx[:3]
        targets = predict_batch(kw_latents[idx], cls_kw.params)
        noise = models_kw.noise_clip.samples
        for i, t in zip(idx, targets):
            att = integrated_gradients_input(
                kw_data.clips[i], noise, codec_kw.params, codec_config,
                cls_kw.params, int(t), steps=128,
            )
            dF = target_logit_input(kw_data.clips[i], codec_kw.params, codec_config,
                                    cls_kw.params, int(t)) - \
                target_logit_input(noise, codec_kw.params, codec_config,
                                   cls_kw.params, int(t))
            assert abs(float(att.scores.sum()) - dF) <= 0.01 * abs(dF) + 1e-6

    def test_length_mismatch(self, codec_kw, codec_config, cls_kw):
        with pytest.raises(DimensionError):
            integrated_gradients_input(
                np.zeros(100, dtype=np.float32), np.zeros(200, dtype=np.float32),
                codec_kw.params, codec_config, cls_kw.params, 0,
            )


class TestRandomBaselineMethod:
    def test_method_tag_and_range(self):
        att = random_attribution((5, 3), seed=0, method=RANDOM_INPUT)
        assert att.method == RANDOM_INPUT
        assert np.all(att.scores >= 0) and np.all(att.scores < 1)
