import numpy as np
import pytest
from numpy.testing import assert_allclose

from camcond.epipolar import EpipolarMask
from camcond.injection import (AttentionParams, InjectionBlockWeights,
                               LatentFeature, LinearMap, inject_camera,
                               masked_cross_attention, masked_softmax, softmax,
                               temporal_attention)
from camcond.plucker import plucker_trajectory
from camcond.synth import dolly_trajectory


def _latent(rng, frames=2, channels=4, h=3, w=3):
    return LatentFeature(data=rng.normal(size=(frames, channels, h, w)))


def _rays(frames, h, w):
    return plucker_trajectory(dolly_trajectory(frames), h, w)


def _full_mask(h, w, extra_false=None):
    bits = np.ones((h * w, 2 * h * w), dtype=bool)
    if extra_false is not None:
        bits[extra_false] = False
    return EpipolarMask(bits=bits, h=h, w=w, ratio=1.0)


# -- softmax kernels --------------------------------------------------------

def test_softmax_rows_sum_to_one(rng):
    logits = rng.normal(scale=40.0, size=(5, 7))
    probs = softmax(logits)
    assert np.abs(probs.sum(axis=-1) - 1.0).max() <= 1e-9
    assert probs.min() >= 0


def test_masked_softmax_ignores_masked_logits(rng):
    logits = rng.normal(size=(3, 6))
    mask = np.ones((3, 6), dtype=bool)
    mask[:, 4:] = False
    # a huge masked logit must not shift the max or leak probability mass
    spiked = logits.copy()
    spiked[:, 5] = 1e308
    probs = masked_softmax(spiked, mask)
    assert np.isfinite(probs).all()
    assert np.abs(probs.sum(axis=-1) - 1.0).max() <= 1e-12
    assert np.array_equal(probs[:, 4:], np.zeros((3, 2)))
    assert np.array_equal(probs, masked_softmax(logits, mask))


def test_masked_softmax_all_true_equals_softmax(rng):
    logits = rng.normal(size=(4, 5))
    mask = np.ones((4, 5), dtype=bool)
    assert np.array_equal(masked_softmax(logits, mask), softmax(logits))


def test_masked_softmax_empty_row_raises(rng):
    logits = rng.normal(size=(2, 3))
    mask = np.ones((2, 3), dtype=bool)
    mask[1] = False
    with pytest.raises(ValueError, match="empty attention row"):
        masked_softmax(logits, mask)


# -- temporal attention -----------------------------------------------------

def test_single_frame_reduces_to_value_path(rng):
    z = _latent(rng, frames=1)
    params = AttentionParams.create(4, heads=2, seed=3)
    out = temporal_attention(z, params)
    # one key per query: softmax collapses to 1, leaving OutProj(VProj(z))
    seq = z.data.transpose(2, 3, 0, 1).reshape(9, 1, 4)
    expected = (seq @ params.wv) @ params.wo
    assert np.array_equal(
        out.data, expected.reshape(3, 3, 1, 4).transpose(2, 3, 0, 1))


def test_constant_frames_stay_constant(rng):
    frame = rng.normal(size=(1, 4, 3, 3))
    z = LatentFeature(data=np.repeat(frame, 2, axis=0))
    params = AttentionParams.create(4, heads=2, seed=5)
    out = temporal_attention(z, params)
    assert np.array_equal(out.data[0], out.data[1])
    single = temporal_attention(LatentFeature(data=frame), params)
    assert_allclose(out.data[0], single.data[0], atol=1e-12)


def _loop_attention(z, params):
    """Per-pixel, per-head scalar reimplementation of temporal attention."""
    n, c, h, w = z.shape
    out = np.zeros_like(z)
    for i in range(h):
        for j in range(w):
            x = z[:, :, i, j]                       # (n, c)
            q, k, v = x @ params.wq, x @ params.wk, x @ params.wv
            merged = np.zeros((n, params.heads * params.head_dim))
            for head in range(params.heads):
                sl = slice(head * params.head_dim, (head + 1) * params.head_dim)
                logits = q[:, sl] @ k[:, sl].T / np.sqrt(params.head_dim)
                probs = np.exp(logits - logits.max(axis=1, keepdims=True))
                probs /= probs.sum(axis=1, keepdims=True)
                merged[:, sl] = probs @ v[:, sl]
            out[:, :, i, j] = merged @ params.wo
    return out


def test_matches_per_pixel_loop_oracle(rng):
    z = _latent(rng, frames=3, channels=4, h=2, w=3)
    params = AttentionParams.create(4, heads=2, seed=11)
    out = temporal_attention(z, params)
    assert_allclose(out.data, _loop_attention(z.data, params), atol=1e-12)


def test_temporal_attention_channel_mismatch(rng):
    z = _latent(rng, channels=4)
    params = AttentionParams.create(6, heads=2)
    with pytest.raises(ValueError, match="channels"):
        temporal_attention(z, params)


def test_pixels_do_not_mix(rng):
    z = _latent(rng, frames=2, channels=4, h=2, w=2)
    params = AttentionParams.create(4, heads=2, seed=7)
    out = temporal_attention(z, params)
    bumped = z.data.copy()
    bumped[:, :, 1, 1] += 1.0
    out2 = temporal_attention(LatentFeature(data=bumped), params)
    assert np.array_equal(out.data[:, :, 0, :], out2.data[:, :, 0, :])
    assert not np.allclose(out.data[:, :, 1, 1], out2.data[:, :, 1, 1])


# -- camera injection -------------------------------------------------------

def test_zero_init_is_bit_identical_to_pretrained(rng):
    z = _latent(rng, frames=2, channels=4, h=4, w=4)
    p = _rays(2, 4, 4)
    weights = InjectionBlockWeights.initialize(channels=4, heads=2, seed=9)
    out = inject_camera(z, p, weights)
    pretrained = temporal_attention(z, weights.temporal_attn_pretrained)
    assert np.array_equal(out.data, pretrained.data)


def test_camera_branch_composition(rng):
    # with the identity input map, the camera branch is exactly
    # linear_out(attn_cam(z)) for any valid ray embedding
    z = _latent(rng, frames=2, channels=4, h=4, w=4)
    p = _rays(2, 4, 4)
    base = InjectionBlockWeights.initialize(channels=4, heads=2, seed=9)
    weights = InjectionBlockWeights(
        linear_in=base.linear_in,
        temporal_attn_cam=base.temporal_attn_cam,
        linear_out=LinearMap(w=rng.normal(size=(4, 4)), b=rng.normal(size=4)),
        temporal_attn_pretrained=base.temporal_attn_pretrained,
    )
    out = inject_camera(z, p, weights)
    cam = temporal_attention(z, weights.temporal_attn_cam).data
    branch = np.einsum("nchw,cd->ndhw", cam, weights.linear_out.w) \
        + weights.linear_out.b[None, :, None, None]
    pretrained = temporal_attention(z, weights.temporal_attn_pretrained).data
    assert_allclose(out.data, branch + pretrained, atol=1e-12)


def test_output_scales_linearly_in_output_map(rng):
    z = _latent(rng, frames=2, channels=4, h=2, w=2)
    p = _rays(2, 2, 2)
    base = InjectionBlockWeights.initialize(channels=4, heads=2, seed=9)
    direction = rng.normal(size=(4, 4))

    def run(eps):
        weights = InjectionBlockWeights(
            linear_in=base.linear_in,
            temporal_attn_cam=base.temporal_attn_cam,
            linear_out=LinearMap(w=eps * direction, b=np.zeros(4)),
            temporal_attn_pretrained=base.temporal_attn_pretrained,
        )
        return inject_camera(z, p, weights).data

    eps = 2.0 ** -20
    base_out = run(0.0)
    d1 = run(eps) - base_out
    d2 = run(2 * eps) - base_out
    assert_allclose(d2, 2.0 * d1, rtol=1e-6, atol=1e-18)


def test_inject_camera_shape_validation(rng):
    z = _latent(rng, frames=2, channels=4, h=4, w=4)
    weights = InjectionBlockWeights.initialize(channels=4, heads=2)
    with pytest.raises(ValueError, match="ray embedding"):
        inject_camera(z, _rays(3, 4, 4), weights)
    with pytest.raises(ValueError, match="ray embedding"):
        inject_camera(z, _rays(2, 2, 2), weights)
    with pytest.raises(ValueError, match="channels"):
        inject_camera(_latent(rng, frames=2, channels=6, h=4, w=4),
                      _rays(2, 4, 4), weights)


# -- masked cross attention -------------------------------------------------

def _cross_inputs(rng, frames=2, channels=4, kv_channels=3, h=2, w=2):
    z = _latent(rng, frames=frames, channels=channels, h=h, w=w)
    cond = rng.normal(size=(frames, kv_channels, h, 2 * w))
    params = AttentionParams.create(channels, heads=2,
                                    kv_channels=kv_channels, seed=13)
    return z, cond, params


def test_cross_attention_single_key_rows(rng):
    z, cond, params = _cross_inputs(rng)
    h, w = z.h, z.w
    hw = h * w
    picks = rng.integers(0, 2 * hw, size=hw)
    bits = np.zeros((hw, 2 * hw), dtype=bool)
    bits[np.arange(hw), picks] = True
    mask = EpipolarMask(bits=bits, h=h, w=w, ratio=1.0 / (2 * hw))
    out = masked_cross_attention(z, cond, mask, params)
    left = cond[:, :, :, :w].transpose(0, 2, 3, 1).reshape(z.frames, hw, -1)
    right = cond[:, :, :, w:].transpose(0, 2, 3, 1).reshape(z.frames, hw, -1)
    keys = np.concatenate([left, right], axis=1)
    values = (keys @ params.wv) @ params.wo      # (frames, 2hw, c)
    expected = values[:, picks, :]               # query q reads key picks[q]
    assert np.array_equal(
        out.data, expected.reshape(z.frames, h, w, -1).transpose(0, 3, 1, 2))


def _loop_cross(z, cond, bits, params):
    n, c, h, w = z.shape
    left = cond[:, :, :, :w].transpose(0, 2, 3, 1).reshape(n, h * w, -1)
    right = cond[:, :, :, w:].transpose(0, 2, 3, 1).reshape(n, h * w, -1)
    keys = np.concatenate([left, right], axis=1)
    out = np.zeros_like(z)
    for f in range(n):
        for q in range(h * w):
            x = z[f, :, q // w, q % w]
            qv = x @ params.wq
            kv = keys[f] @ params.wk
            vv = keys[f] @ params.wv
            merged = np.zeros(params.heads * params.head_dim)
            for head in range(params.heads):
                sl = slice(head * params.head_dim, (head + 1) * params.head_dim)
                logits = kv[:, sl] @ qv[sl] / np.sqrt(params.head_dim)
                logits = np.where(bits[q], logits, -np.inf)
                probs = np.exp(logits - logits.max())
                probs /= probs.sum()
                merged[sl] = probs @ vv[:, sl]
            out[f, :, q // w, q % w] = merged @ params.wo
    return out


def test_cross_attention_matches_loop_oracle(rng):
    z, cond, params = _cross_inputs(rng)
    bits = rng.uniform(size=(4, 8)) < 0.6
    bits[:, 0] = True  # no empty rows
    mask = EpipolarMask(bits=bits, h=2, w=2, ratio=0.6)
    out = masked_cross_attention(z, cond, mask, params)
    assert_allclose(out.data, _loop_cross(z.data, cond, bits, params),
                    atol=1e-12)


def test_widening_one_row_leaves_other_rows_untouched(rng):
    z, cond, params = _cross_inputs(rng)
    narrow = rng.uniform(size=(4, 8)) < 0.5
    narrow[:, 3] = True
    wide = narrow.copy()
    wide[2] = True  # only query 2 sees more keys
    out_narrow = masked_cross_attention(
        z, cond, EpipolarMask(bits=narrow, h=2, w=2, ratio=0.5), params)
    out_wide = masked_cross_attention(
        z, cond, EpipolarMask(bits=wide, h=2, w=2, ratio=1.0), params)
    flat_n = out_narrow.data.reshape(z.frames, z.channels, 4)
    flat_w = out_wide.data.reshape(z.frames, z.channels, 4)
    untouched = [0, 1, 3]
    assert np.array_equal(flat_n[:, :, untouched], flat_w[:, :, untouched])
    assert not np.allclose(flat_n[:, :, 2], flat_w[:, :, 2])


def test_query_permutation_equivariance(rng):
    z, cond, params = _cross_inputs(rng)
    h, w = z.h, z.w
    hw = h * w
    bits = rng.uniform(size=(hw, 2 * hw)) < 0.5
    bits[:, 1] = True
    perm = rng.permutation(hw)
    flat = z.data.reshape(z.frames, z.channels, hw)
    z_perm = LatentFeature(
        data=flat[:, :, perm].reshape(z.frames, z.channels, h, w))
    out = masked_cross_attention(
        z, cond, EpipolarMask(bits=bits, h=h, w=w, ratio=0.5), params)
    out_perm = masked_cross_attention(
        z_perm, cond, EpipolarMask(bits=bits[perm], h=h, w=w, ratio=0.5),
        params)
    assert np.array_equal(
        out_perm.data.reshape(z.frames, z.channels, hw),
        out.data.reshape(z.frames, z.channels, hw)[:, :, perm])


def test_all_true_mask_attends_everywhere(rng):
    z, cond, params = _cross_inputs(rng)
    out = masked_cross_attention(z, cond, _full_mask(2, 2), params)
    # every output entry depends on every key once nothing is masked
    bumped = cond.copy()
    bumped[:, :, 1, 3] += 10.0
    out2 = masked_cross_attention(z, bumped, _full_mask(2, 2), params)
    assert not np.isclose(out.data, out2.data).any()


def test_cross_attention_empty_row_rejected(rng):
    z, cond, params = _cross_inputs(rng)
    bits = np.ones((4, 8), dtype=bool)
    bits[3] = False
    mask = EpipolarMask(bits=bits, h=2, w=2, ratio=0.5)
    with pytest.raises(ValueError, match="empty attention row"):
        masked_cross_attention(z, cond, mask, params)


def test_cross_attention_shape_validation(rng):
    z, cond, params = _cross_inputs(rng)
    with pytest.raises(ValueError, match="neighbor condition"):
        masked_cross_attention(z, cond[:, :, :, :3], _full_mask(2, 2), params)
    with pytest.raises(ValueError, match="mask"):
        masked_cross_attention(z, cond, _full_mask(2, 3), params)
    bad_params = AttentionParams.create(4, heads=2, kv_channels=5)
    with pytest.raises(ValueError, match="params"):
        masked_cross_attention(z, cond, _full_mask(2, 2), bad_params)


# -- parameter containers ---------------------------------------------------

def test_attention_params_validation(rng):
    with pytest.raises(ValueError, match="divisible"):
        AttentionParams.create(5, heads=2)
    with pytest.raises(ValueError, match="positive"):
        AttentionParams(heads=0, head_dim=2, wq=np.zeros((4, 0)),
                        wk=np.zeros((4, 0)), wv=np.zeros((4, 0)),
                        wo=np.zeros((0, 4)))
    good = AttentionParams.create(4, heads=2)
    with pytest.raises(ValueError, match="wo"):
        AttentionParams(heads=2, head_dim=2, wq=good.wq, wk=good.wk,
                        wv=good.wv, wo=np.zeros((3, 4)))
    with pytest.raises(ValueError, match="share"):
        AttentionParams(heads=2, head_dim=2, wq=good.wq, wk=good.wk,
                        wv=np.zeros((5, 4)), wo=good.wo)


def test_latent_feature_validation(rng):
    with pytest.raises(ValueError, match="non-finite"):
        LatentFeature(data=np.full((1, 1, 1, 1), np.nan))
    with pytest.raises(ValueError, match="shape"):
        LatentFeature(data=np.zeros((2, 2, 2)))
    z = _latent(rng)
    with pytest.raises(ValueError):
        z.data[0, 0, 0, 0] = 1.0


def test_initialize_weights_contract():
    weights = InjectionBlockWeights.initialize(channels=6, heads=3, seed=1)
    assert np.array_equal(weights.linear_in.w[:6], np.eye(6))
    assert np.array_equal(weights.linear_in.w[6:], np.zeros((6, 6)))
    assert not weights.linear_out.w.any()
    assert not weights.linear_out.b.any()
    with pytest.raises(ValueError, match="linear_in"):
        InjectionBlockWeights(
            linear_in=LinearMap(w=np.eye(6), b=np.zeros(6)),
            temporal_attn_cam=weights.temporal_attn_cam,
            linear_out=weights.linear_out,
            temporal_attn_pretrained=weights.temporal_attn_pretrained)
