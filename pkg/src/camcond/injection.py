"""Dense-algebra reference of the camera-injection attention block.

A numerical testbed, not a trainable network: multi-head scaled dot-product
attention over the frame axis, a camera branch that concatenates the ray
embedding to the latent and is gated by a zero-initialized output
projection, and an epipolar-masked cross-attention over neighbor-view
features. Everything runs in float64 with a fixed reduction order so the
zero-init identity can be asserted bit for bit, and every operation has a
matching hand-derived backward pass (see gradcheck).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .epipolar import EpipolarMask
from .plucker import PluckerTensor


@dataclass(frozen=True)
class LatentFeature:
    """Frame-major feature map of shape (frames, channels, h, w)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 4 or min(data.shape) < 1:
            raise ValueError(f"expected shape (frames, channels, h, w), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("latent feature contains non-finite entries")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def h(self) -> int:
        return self.data.shape[2]

    @property
    def w(self) -> int:
        return self.data.shape[3]


@dataclass(frozen=True)
class AttentionParams:
    """Projection matrices of one multi-head attention layer.

    Weights act on row vectors: q = x @ wq. The inner model width is
    heads * head_dim; wk/wv may consume a different channel count than wq
    (cross-attention), and wo maps back to the query channel count.
    """

    heads: int
    head_dim: int
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray

    def __post_init__(self):
        if self.heads < 1 or self.head_dim < 1:
            raise ValueError("heads and head_dim must be positive")
        d = self.heads * self.head_dim
        wq = np.asarray(self.wq, dtype=float)
        wk = np.asarray(self.wk, dtype=float)
        wv = np.asarray(self.wv, dtype=float)
        wo = np.asarray(self.wo, dtype=float)
        if wq.ndim != 2 or wq.shape[1] != d:
            raise ValueError(f"wq must map channels -> {d}, got {wq.shape}")
        if wk.ndim != 2 or wk.shape[1] != d:
            raise ValueError(f"wk must map channels -> {d}, got {wk.shape}")
        if wv.shape != wk.shape:
            raise ValueError("wk and wv must share their shape")
        if wo.shape[0] != d:
            raise ValueError(f"wo must map {d} -> channels, got {wo.shape}")
        for name, m in (("wq", wq), ("wk", wk), ("wv", wv), ("wo", wo)):
            m = m.copy()
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def query_channels(self) -> int:
        return self.wq.shape[0]

    @property
    def kv_channels(self) -> int:
        return self.wk.shape[0]

    @property
    def out_channels(self) -> int:
        return self.wo.shape[1]

    @classmethod
    def create(cls, channels: int, heads: int, kv_channels: Optional[int] = None,
               seed: int = 0) -> "AttentionParams":
        """Seeded random parameters with channels == heads * head_dim."""
        if channels % heads != 0:
            raise ValueError("channels must be divisible by heads")
        head_dim = channels // heads
        kv = channels if kv_channels is None else kv_channels
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(channels)
        return cls(
            heads=heads,
            head_dim=head_dim,
            wq=rng.normal(scale=scale, size=(channels, channels)),
            wk=rng.normal(scale=scale, size=(kv, channels)),
            wv=rng.normal(scale=scale, size=(kv, channels)),
            wo=rng.normal(scale=scale, size=(channels, channels)),
        )


@dataclass(frozen=True)
class LinearMap:
    """Affine map on channel vectors: y = x @ w + b."""

    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if w.ndim != 2 or b.shape != (w.shape[1],):
            raise ValueError(f"inconsistent linear map shapes {w.shape} / {b.shape}")
        w = w.copy()
        w.setflags(write=False)
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class InjectionBlockWeights:
    """Parameter set of the camera-injection block.

    Fresh weights from :meth:`initialize` satisfy the identity contract: the
    input map passes the latent through unchanged and ignores the ray
    embedding, and the output map is identically zero, so the camera branch
    contributes nothing until trained.
    """

    linear_in: LinearMap
    temporal_attn_cam: AttentionParams
    linear_out: LinearMap
    temporal_attn_pretrained: AttentionParams

    def __post_init__(self):
        c = self.linear_in.w.shape[1]
        if self.linear_in.w.shape[0] != c + 6:
            raise ValueError("linear_in must consume channels + 6 ray channels")
        if self.linear_out.w.shape != (c, c):
            raise ValueError("linear_out must be square over the latent channels")
        if self.temporal_attn_cam.query_channels != c or \
                self.temporal_attn_cam.out_channels != c:
            raise ValueError("camera attention must preserve the channel count")
        if self.temporal_attn_pretrained.query_channels != c or \
                self.temporal_attn_pretrained.out_channels != c:
            raise ValueError("pretrained attention must preserve the channel count")

    @property
    def channels(self) -> int:
        return self.linear_out.w.shape[0]

    @classmethod
    def initialize(cls, channels: int, heads: int, seed: int = 0) -> "InjectionBlockWeights":
        """Zero-init block: identity on the latent columns, zeros elsewhere."""
        w_in = np.zeros((channels + 6, channels))
        w_in[:channels, :] = np.eye(channels)
        return cls(
            linear_in=LinearMap(w=w_in, b=np.zeros(channels)),
            temporal_attn_cam=AttentionParams.create(channels, heads, seed=seed),
            linear_out=LinearMap(w=np.zeros((channels, channels)), b=np.zeros(channels)),
            temporal_attn_pretrained=AttentionParams.create(channels, heads, seed=seed + 1),
        )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row softmax over the last axis, max-shifted for stability."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax restricted to keys where ``mask`` is true.

    The max shift is taken over unmasked entries only; masked entries get an
    explicit -inf before exponentiation, so no (-inf) - (-inf) NaN can arise.
    Rows with no unmasked key are rejected.
    """
    mask = np.broadcast_to(mask, logits.shape)
    if not mask.any(axis=-1).all():
        raise ValueError("empty attention row")
    neg = np.where(mask, logits, -np.inf)
    shifted = neg - neg.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _softmax_vjp(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    return probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))


def _split_heads(x: np.ndarray, heads: int, head_dim: int) -> np.ndarray:
    b, n, _ = x.shape
    return x.reshape(b, n, heads, head_dim).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, heads, n, head_dim = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, heads * head_dim)


def _mha_forward(xq: np.ndarray, xkv: np.ndarray, params: AttentionParams,
                 mask: Optional[np.ndarray] = None):
    """Batched multi-head attention. xq (b, nq, cq), xkv (b, nk, ck)."""
    q = xq @ params.wq
    k = xkv @ params.wk
    v = xkv @ params.wv
    qh = _split_heads(q, params.heads, params.head_dim)
    kh = _split_heads(k, params.heads, params.head_dim)
    vh = _split_heads(v, params.heads, params.head_dim)
    alpha = 1.0 / np.sqrt(params.head_dim)
    logits = (qh @ kh.swapaxes(-1, -2)) * alpha
    if mask is None:
        probs = softmax(logits)
    else:
        probs = masked_softmax(logits, mask[None, None, :, :])
    yh = probs @ vh
    y = _merge_heads(yh)
    out = y @ params.wo
    cache = (xq, xkv, params, qh, kh, vh, probs, y, alpha)
    return out, cache


def _mha_vjp(cache, dout: np.ndarray):
    """Gradients of sum-style losses through _mha_forward.

    Returns (dxq, dxkv, dwq, dwk, dwv, dwo). For self-attention callers add
    dxq + dxkv.
    """
    xq, xkv, params, qh, kh, vh, probs, y, alpha = cache
    dwo = np.einsum("bnd,bnc->dc", y, dout)
    dy = dout @ params.wo.T
    dyh = _split_heads(dy, params.heads, params.head_dim)
    dprobs = dyh @ vh.swapaxes(-1, -2)
    dvh = probs.swapaxes(-1, -2) @ dyh
    dlogits = _softmax_vjp(probs, dprobs)
    dqh = (dlogits @ kh) * alpha
    dkh = (dlogits.swapaxes(-1, -2) @ qh) * alpha
    dq = _merge_heads(dqh)
    dk = _merge_heads(dkh)
    dv = _merge_heads(dvh)
    dwq = np.einsum("bnc,bnd->cd", xq, dq)
    dwk = np.einsum("bnc,bnd->cd", xkv, dk)
    dwv = np.einsum("bnc,bnd->cd", xkv, dv)
    dxq = dq @ params.wq.T
    dxkv = dk @ params.wk.T + dv @ params.wv.T
    return dxq, dxkv, dwq, dwk, dwv, dwo


def _to_sequences(data: np.ndarray) -> np.ndarray:
    """(frames, c, h, w) -> (h*w, frames, c): one frame sequence per pixel."""
    n, c, h, w = data.shape
    return data.transpose(2, 3, 0, 1).reshape(h * w, n, c)


def _from_sequences(seq: np.ndarray, h: int, w: int) -> np.ndarray:
    hw, n, c = seq.shape
    return seq.reshape(h, w, n, c).transpose(2, 3, 0, 1)


def temporal_attention(z: LatentFeature, params: AttentionParams) -> LatentFeature:
    """Self-attention along the frame axis, independently per pixel."""
    if params.query_channels != z.channels or params.kv_channels != z.channels \
            or params.out_channels != z.channels:
        raise ValueError(
            f"attention params expect {params.query_channels} channels, "
            f"latent has {z.channels}")
    seq = _to_sequences(z.data)
    out, _ = _mha_forward(seq, seq, params)
    return LatentFeature(data=_from_sequences(out, z.h, z.w))


def _apply_linear(data: np.ndarray, lin: LinearMap) -> np.ndarray:
    """Channel-wise affine map on (frames, c, h, w) data."""
    moved = data.transpose(0, 2, 3, 1)
    out = moved @ lin.w + lin.b
    return out.transpose(0, 3, 1, 2)


def inject_camera(z: LatentFeature, p: PluckerTensor,
                  weights: InjectionBlockWeights) -> LatentFeature:
    """Camera-conditioned temporal block.

    Concatenates the ray embedding to the latent channels, passes the result
    through the input map, the camera temporal attention and the output map,
    and adds it to the unconditioned temporal attention of the original
    latent. With freshly initialized weights the camera branch is exactly
    zero and the output equals the unconditioned path bit for bit.
    """
    if z.channels != weights.channels:
        raise ValueError(f"latent has {z.channels} channels, weights expect "
                         f"{weights.channels}")
    if p.data.shape[0] != z.frames or p.data.shape[2:] != (z.h, z.w):
        raise ValueError(
            f"ray embedding shape {p.data.shape} does not match latent "
            f"({z.frames}, *, {z.h}, {z.w})")
    cat = np.concatenate([z.data, p.data], axis=1)
    cam = _apply_linear(cat, weights.linear_in)
    seq = _to_sequences(cam)
    attn, _ = _mha_forward(seq, seq, weights.temporal_attn_cam)
    cam = _apply_linear(_from_sequences(attn, z.h, z.w), weights.linear_out)
    seq_z = _to_sequences(z.data)
    pre, _ = _mha_forward(seq_z, seq_z, weights.temporal_attn_pretrained)
    out = cam + _from_sequences(pre, z.h, z.w)
    return LatentFeature(data=out)


def _neighbor_keys(cond: np.ndarray, w: int) -> np.ndarray:
    """(frames, c, h, 2w) -> (frames, 2*h*w, c), left block first then right."""
    n, c, h, w2 = cond.shape
    left = cond[:, :, :, :w].transpose(0, 2, 3, 1).reshape(n, h * w, c)
    right = cond[:, :, :, w:].transpose(0, 2, 3, 1).reshape(n, h * w, c)
    return np.concatenate([left, right], axis=1)


def masked_cross_attention(z: LatentFeature, neighbor_cond: np.ndarray,
                           mask: EpipolarMask,
                           params: AttentionParams) -> LatentFeature:
    """Cross-attention from latent pixels onto masked neighbor-view pixels.

    ``neighbor_cond`` is the width-concatenated (left | right) neighbor
    feature map of shape (frames, c, h, 2w). Key k of the mask addresses the
    left block for k < h*w and the right block otherwise. Masked logits are
    sent to -inf before the softmax.
    """
    cond = np.asarray(neighbor_cond, dtype=float)
    if cond.ndim != 4 or cond.shape[0] != z.frames or \
            cond.shape[2] != z.h or cond.shape[3] != 2 * z.w:
        raise ValueError(
            f"neighbor condition shape {cond.shape} does not match latent "
            f"({z.frames}, *, {z.h}, {2 * z.w})")
    if (mask.h, mask.w) != (z.h, z.w):
        raise ValueError(f"mask is for a {mask.h}x{mask.w} grid, latent is "
                         f"{z.h}x{z.w}")
    if params.query_channels != z.channels or params.kv_channels != cond.shape[1] \
            or params.out_channels != z.channels:
        raise ValueError("attention params inconsistent with input channels")
    if not mask.bits.any(axis=1).all():
        raise ValueError("empty attention row")
    n = z.frames
    queries = z.data.transpose(0, 2, 3, 1).reshape(n, z.h * z.w, z.channels)
    keys = _neighbor_keys(cond, z.w)
    out, _ = _mha_forward(queries, keys, params, mask=mask.bits)
    return LatentFeature(
        data=out.reshape(n, z.h, z.w, z.channels).transpose(0, 3, 1, 2))
