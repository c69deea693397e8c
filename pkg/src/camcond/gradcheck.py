"""Central-difference verification of the analytic attention gradients.

Each handle bundles a scalar loss (sum of the operation's outputs) over a
flattened parameter vector together with its hand-derived gradient. The
checker perturbs one coordinate at a time, so it is deliberately
single-threaded and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .epipolar import EpipolarMask
from .injection import (
    AttentionParams,
    InjectionBlockWeights,
    LatentFeature,
    LinearMap,
    _from_sequences,
    _mha_forward,
    _mha_vjp,
    _neighbor_keys,
    _to_sequences,
    inject_camera,
    masked_cross_attention,
    temporal_attention,
)
from .plucker import PluckerTensor


@dataclass(frozen=True)
class DifferentiableOp:
    """Scalar loss over a flat parameter vector plus its analytic gradient."""

    name: str
    theta0: np.ndarray
    loss: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


def _pack(arrays: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])


def _unpack(theta: np.ndarray, shapes: Sequence[tuple]) -> list[np.ndarray]:
    out = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        out.append(theta[offset:offset + size].reshape(shape))
        offset += size
    if offset != theta.size:
        raise ValueError("parameter vector has wrong length")
    return out


def _attn_from(theta_parts: list[np.ndarray], template: AttentionParams) -> AttentionParams:
    wq, wk, wv, wo = theta_parts
    return AttentionParams(heads=template.heads, head_dim=template.head_dim,
                           wq=wq, wk=wk, wv=wv, wo=wo)


def finite_difference_check(op: DifferentiableOp, eps: float = 1e-5) -> float:
    """Max relative error between central differences and the analytic gradient."""
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    theta0 = np.asarray(op.theta0, dtype=float)
    analytic = np.asarray(op.grad(theta0), dtype=float)
    if not np.all(np.isfinite(analytic)):
        raise ValueError(f"{op.name}: non-finite analytic gradient")
    numeric = np.empty_like(analytic)
    for i in range(theta0.size):
        theta = theta0.copy()
        theta[i] = theta0[i] + eps
        hi = op.loss(theta)
        theta[i] = theta0[i] - eps
        lo = op.loss(theta)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError(f"{op.name}: non-finite loss during perturbation")
        numeric[i] = (hi - lo) / (2.0 * eps)
    denom = np.maximum(np.maximum(np.abs(numeric), np.abs(analytic)), 1.0)
    return float(np.max(np.abs(numeric - analytic) / denom))


def linear_op(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> DifferentiableOp:
    """Plain affine map, exact under central differences."""
    x = np.asarray(x, dtype=float)
    shapes = [np.asarray(w).shape, np.asarray(b).shape]

    def loss(theta):
        wt, bt = _unpack(theta, shapes)
        return float((x @ wt + bt).sum())

    def grad(theta):
        wt, bt = _unpack(theta, shapes)
        dw = x.T @ np.ones((x.shape[0], wt.shape[1]))
        db = np.full(bt.shape, float(x.shape[0]))
        return _pack([dw, db])

    return DifferentiableOp(name="linear", theta0=_pack([w, b]), loss=loss, grad=grad)


def temporal_attention_op(z: LatentFeature, params: AttentionParams) -> DifferentiableOp:
    shapes = [params.wq.shape, params.wk.shape, params.wv.shape, params.wo.shape]

    def loss(theta):
        p = _attn_from(_unpack(theta, shapes), params)
        return float(temporal_attention(z, p).data.sum())

    def grad(theta):
        p = _attn_from(_unpack(theta, shapes), params)
        seq = _to_sequences(z.data)
        out, cache = _mha_forward(seq, seq, p)
        _, _, dwq, dwk, dwv, dwo = _mha_vjp(cache, np.ones_like(out))
        return _pack([dwq, dwk, dwv, dwo])

    theta0 = _pack([params.wq, params.wk, params.wv, params.wo])
    return DifferentiableOp(name="temporal_attention", theta0=theta0, loss=loss, grad=grad)


def masked_cross_attention_op(z: LatentFeature, neighbor_cond: np.ndarray,
                              mask: EpipolarMask,
                              params: AttentionParams) -> DifferentiableOp:
    shapes = [params.wq.shape, params.wk.shape, params.wv.shape, params.wo.shape]
    cond = np.asarray(neighbor_cond, dtype=float)

    def loss(theta):
        p = _attn_from(_unpack(theta, shapes), params)
        return float(masked_cross_attention(z, cond, mask, p).data.sum())

    def grad(theta):
        p = _attn_from(_unpack(theta, shapes), params)
        n = z.frames
        queries = z.data.transpose(0, 2, 3, 1).reshape(n, z.h * z.w, z.channels)
        keys = _neighbor_keys(cond, z.w)
        out, cache = _mha_forward(queries, keys, p, mask=mask.bits)
        _, _, dwq, dwk, dwv, dwo = _mha_vjp(cache, np.ones_like(out))
        return _pack([dwq, dwk, dwv, dwo])

    theta0 = _pack([params.wq, params.wk, params.wv, params.wo])
    return DifferentiableOp(name="masked_cross_attention", theta0=theta0,
                            loss=loss, grad=grad)


def _weights_from(parts: list[np.ndarray], template: InjectionBlockWeights) -> InjectionBlockWeights:
    return InjectionBlockWeights(
        linear_in=LinearMap(w=parts[0], b=parts[1]),
        temporal_attn_cam=_attn_from(parts[2:6], template.temporal_attn_cam),
        linear_out=LinearMap(w=parts[6], b=parts[7]),
        temporal_attn_pretrained=_attn_from(parts[8:12], template.temporal_attn_pretrained),
    )


def _injection_shapes(w: InjectionBlockWeights) -> list[tuple]:
    cam, pre = w.temporal_attn_cam, w.temporal_attn_pretrained
    return [
        w.linear_in.w.shape, w.linear_in.b.shape,
        cam.wq.shape, cam.wk.shape, cam.wv.shape, cam.wo.shape,
        w.linear_out.w.shape, w.linear_out.b.shape,
        pre.wq.shape, pre.wk.shape, pre.wv.shape, pre.wo.shape,
    ]


def _injection_theta(w: InjectionBlockWeights) -> np.ndarray:
    cam, pre = w.temporal_attn_cam, w.temporal_attn_pretrained
    return _pack([
        w.linear_in.w, w.linear_in.b,
        cam.wq, cam.wk, cam.wv, cam.wo,
        w.linear_out.w, w.linear_out.b,
        pre.wq, pre.wk, pre.wv, pre.wo,
    ])


def inject_camera_op(z: LatentFeature, p: PluckerTensor,
                     weights: InjectionBlockWeights) -> DifferentiableOp:
    shapes = _injection_shapes(weights)

    def loss(theta):
        w = _weights_from(_unpack(theta, shapes), weights)
        return float(inject_camera(z, p, w).data.sum())

    def grad(theta):
        w = _weights_from(_unpack(theta, shapes), weights)
        h, wd = z.h, z.w
        cat = np.concatenate([z.data, p.data], axis=1).transpose(0, 2, 3, 1)
        a1 = cat @ w.linear_in.w + w.linear_in.b            # (n, h, w, c)
        seq1 = _to_sequences(a1.transpose(0, 3, 1, 2))
        out1, cache_cam = _mha_forward(seq1, seq1, w.temporal_attn_cam)
        a2 = _from_sequences(out1, h, wd).transpose(0, 2, 3, 1)
        seq_z = _to_sequences(z.data)
        out_pre, cache_pre = _mha_forward(seq_z, seq_z, w.temporal_attn_pretrained)

        d_a3 = np.ones_like(a2)
        dw_out = np.einsum("nhwc,nhwd->cd", a2, d_a3)
        db_out = d_a3.sum(axis=(0, 1, 2))
        d_a2 = d_a3 @ w.linear_out.w.T
        d_out1 = _to_sequences(d_a2.transpose(0, 3, 1, 2))
        dxq, dxkv, dwq_c, dwk_c, dwv_c, dwo_c = _mha_vjp(cache_cam, d_out1)
        d_seq1 = dxq + dxkv
        d_a1 = _from_sequences(d_seq1, h, wd).transpose(0, 2, 3, 1)
        dw_in = np.einsum("nhwc,nhwd->cd", cat, d_a1)
        db_in = d_a1.sum(axis=(0, 1, 2))
        _, _, dwq_p, dwk_p, dwv_p, dwo_p = _mha_vjp(cache_pre, np.ones_like(out_pre))
        return _pack([
            dw_in, db_in,
            dwq_c, dwk_c, dwv_c, dwo_c,
            dw_out, db_out,
            dwq_p, dwk_p, dwv_p, dwo_p,
        ])

    return DifferentiableOp(name="inject_camera", theta0=_injection_theta(weights),
                            loss=loss, grad=grad)
