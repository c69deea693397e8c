"""Fundamental matrices between rig neighbors and epipolar attention masks.

For a local view L and a neighbor view N, the fundamental matrix maps
neighbor pixels to epipolar lines in the local view:

    x_L^T @ F @ x_N == 0

for homogeneous pixel coordinates of the same 3D point. Masks keep, per
local query pixel, the fixed-ratio fraction of neighbor pixels with the
smallest algebraic residual |x_L^T F x_N|, concatenated left neighbor first.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .camera import CameraPose, Intrinsics, Rig, pixel_centers, relative_pose, skew

logger = logging.getLogger(__name__)

RANK2_TOL = 1e-9
MIN_BASELINE = 1e-12


class DegenerateGeometryError(ValueError):
    """Raised when camera geometry admits no fundamental matrix."""


@dataclass(frozen=True)
class FundamentalMatrix:
    """Frobenius-normalized rank-2 map from neighbor pixels to local epipolar lines.

    The native intrinsics of both views are retained so dense residual grids
    can be evaluated at any resolution without re-passing the poses.
    """

    f: np.ndarray
    source_view: str
    target_view: str
    source_intrinsics: Intrinsics
    target_intrinsics: Intrinsics

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.shape != (3, 3):
            raise ValueError(f"f must be 3x3, got {f.shape}")
        norm = np.linalg.norm(f)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("f must be Frobenius-normalized")
        s = np.linalg.svd(f, compute_uv=False)
        if s[2] > RANK2_TOL * s[0]:
            raise ValueError("f must have rank 2")
        f = f.copy()
        f.setflags(write=False)
        object.__setattr__(self, "f", f)


def fundamental_matrix(local: CameraPose, neighbor: CameraPose,
                       paper_literal: bool = False) -> FundamentalMatrix:
    """Fundamental matrix of the neighbor->local pixel correspondence.

    The default composition is validated by the projection identity
    x_L^T F x_N = 0. ``paper_literal`` switches to a published variant
    (K_N^-1 R [t]x K_L^-1 with R = R_N^T R_L, t = R_N^T (t_L - t_N)) kept
    only for comparison; it does not satisfy the projection identity.
    """
    rel = relative_pose(local.extrinsics, neighbor.extrinsics)
    if np.linalg.norm(rel.t) <= MIN_BASELINE:
        raise DegenerateGeometryError(
            "degenerate: pure rotation, fundamental matrix undefined")
    k_l_inv = np.linalg.inv(local.intrinsics.k)
    k_n_inv = np.linalg.inv(neighbor.intrinsics.k)
    if paper_literal:
        r_lit = neighbor.extrinsics.r.T @ local.extrinsics.r
        t_lit = neighbor.extrinsics.r.T @ (local.extrinsics.t - neighbor.extrinsics.t)
        f = k_n_inv @ r_lit @ skew(t_lit) @ k_l_inv
    else:
        f = k_l_inv.T @ skew(rel.t) @ rel.r @ k_n_inv
    norm = np.linalg.norm(f)
    if norm == 0.0:
        raise DegenerateGeometryError(
            "degenerate: pure rotation, fundamental matrix undefined")
    f = f / norm
    return FundamentalMatrix(
        f=f,
        source_view=neighbor.view_id,
        target_view=local.view_id,
        source_intrinsics=neighbor.intrinsics,
        target_intrinsics=local.intrinsics,
    )


@dataclass(frozen=True)
class EpipolarResidualField:
    """Dense |x_L^T F x_N| residuals, queries by rows, keys by columns.

    Shape (h*w, 2*h*w): key columns [0, h*w) come from the left neighbor and
    [h*w, 2*h*w) from the right neighbor.
    """

    values: np.ndarray
    h: int
    w: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        hw = self.h * self.w
        if values.shape != (hw, 2 * hw):
            raise ValueError(
                f"expected shape ({hw}, {2 * hw}) for a {self.h}x{self.w} grid, "
                f"got {values.shape}")
        if values.min() < 0:
            raise ValueError("residuals must be non-negative")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def _homogeneous_grid(intrinsics: Intrinsics, h: int, w: int) -> np.ndarray:
    """(h*w, 3) homogeneous pixel-center coordinates in native units, row-major."""
    uu, vv = pixel_centers(intrinsics, h, w)
    return np.stack([uu.ravel(), vv.ravel(), np.ones(h * w)], axis=1)


def _pair_residuals(f: np.ndarray, queries: np.ndarray, keys: np.ndarray,
                    residual: str) -> np.ndarray:
    algebraic = np.abs(queries @ f @ keys.T)
    if residual == "algebraic":
        return algebraic
    if residual == "sampson":
        # first-order geometric error: scale each algebraic residual by the
        # gradient norm of the epipolar constraint at that point pair
        lines_k = f @ keys.T                  # (3, hw) epipolar line per key
        lines_q = f.T @ queries.T             # (3, hw) per query
        grad_sq = (lines_k[0] ** 2 + lines_k[1] ** 2)[None, :] \
            + (lines_q[0] ** 2 + lines_q[1] ** 2)[:, None]
        return algebraic / np.sqrt(np.maximum(grad_sq, np.finfo(float).tiny))
    raise ValueError(f"unknown residual mode {residual!r}")


def residual_field(left: FundamentalMatrix, right: FundamentalMatrix,
                   h: int, w: int,
                   residual: str = "algebraic") -> EpipolarResidualField:
    """Evaluate both neighbor residual grids for every query pixel.

    Entry (q, k) is |x_q^T F_side x_k| with q a local pixel and k a pixel of
    the left neighbor for k < h*w, the right neighbor otherwise. Pixel
    coordinates are taken at grid-cell centers scaled to each view's native
    intrinsics resolution. ``residual="sampson"`` divides each entry by the
    constraint's gradient norm, giving a first-order geometric distance that
    is more uniform across the image than the raw algebraic value.
    """
    if left.target_view != right.target_view:
        raise ValueError(
            f"left targets {left.target_view!r} but right targets {right.target_view!r}")
    queries = _homogeneous_grid(left.target_intrinsics, h, w)  # (hw, 3)
    keys_left = _homogeneous_grid(left.source_intrinsics, h, w)
    keys_right = _homogeneous_grid(right.source_intrinsics, h, w)
    res_left = _pair_residuals(left.f, queries, keys_left, residual)
    res_right = _pair_residuals(right.f, queries, keys_right, residual)
    return EpipolarResidualField(
        values=np.concatenate([res_left, res_right], axis=1), h=h, w=w)


@dataclass(frozen=True)
class EpipolarMask:
    """Boolean cross-attention mask of shape (h*w, 2*h*w)."""

    bits: np.ndarray
    h: int
    w: int
    ratio: float

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.dtype != np.bool_:
            raise ValueError("bits must be boolean")
        hw = self.h * self.w
        if bits.shape != (hw, 2 * hw):
            raise ValueError(f"expected shape ({hw}, {2 * hw}), got {bits.shape}")
        if not (0.0 < self.ratio <= 1.0):
            raise ValueError("ratio must be in (0, 1]")
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)


def row_budget(ratio: float, n_keys: int) -> int:
    """Keys kept per query: floor(ratio * n_keys), clamped into [1, n_keys]."""
    return min(n_keys, max(1, math.floor(ratio * n_keys)))


def epipolar_mask(field: EpipolarResidualField, ratio: float,
                  mode: str = "per-row") -> EpipolarMask:
    """Threshold a residual field into a boolean attention mask.

    ``per-row`` keeps, for every query, the fixed-ratio share of keys with
    the smallest residuals; ties at the cutoff resolve toward the smaller key
    index, so masks are reproducible byte for byte. ``global`` applies one
    threshold across the whole field instead and may leave query rows empty.
    """
    if not (0.0 < ratio <= 1.0):
        raise ValueError("ratio must be in (0, 1]")
    values = field.values
    n_rows, n_keys = values.shape
    bits = np.zeros_like(values, dtype=bool)
    if mode == "per-row":
        budget = row_budget(ratio, n_keys)
        order = np.argsort(values, axis=1, kind="stable")
        rows = np.repeat(np.arange(n_rows), budget)
        bits[rows, order[:, :budget].ravel()] = True
    elif mode == "global":
        budget = min(values.size, max(1, math.floor(ratio * values.size)))
        order = np.argsort(values, axis=None, kind="stable")
        flat = bits.reshape(-1)
        flat[order[:budget]] = True
    else:
        raise ValueError(f"unknown mask mode {mode!r}")
    return EpipolarMask(bits=bits, h=field.h, w=field.w, ratio=ratio)


def rig_masks(rig: Rig, poses: Mapping[str, CameraPose], h: int, w: int,
              ratio: float = 0.25, mode: str = "per-row",
              paper_literal: bool = False) -> dict[str, EpipolarMask]:
    """Compute one attention mask per rig view that has both neighbors.

    Views missing a neighbor are skipped with a logged warning; a view
    missing from ``poses`` is an error.
    """
    for view in rig.views:
        if view not in poses:
            raise ValueError(f"no pose provided for rig view {view!r}")
    masks: dict[str, EpipolarMask] = {}
    for view in rig.views:
        left_id, right_id = rig.neighbors(view)
        if left_id is None or right_id is None:
            logger.warning("view %r lacks a neighbor (left=%r, right=%r); skipped",
                           view, left_id, right_id)
            continue
        f_left = fundamental_matrix(poses[view], poses[left_id],
                                    paper_literal=paper_literal)
        f_right = fundamental_matrix(poses[view], poses[right_id],
                                     paper_literal=paper_literal)
        field = residual_field(f_left, f_right, h, w)
        masks[view] = epipolar_mask(field, ratio, mode=mode)
    return masks
