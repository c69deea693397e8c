"""Pinhole camera types and pose algebra.

Extrinsics follow the world-to-camera convention throughout the package:

    x_cam = R @ x_world + t

so the optical center in world coordinates is ``-R.T @ t``. Datasets that
ship camera-to-world poses (nuScenes calibrated sensors, for instance) must
be inverted before construction. All types are immutable after construction
and validated eagerly; downstream operations assume valid inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

ROTATION_TOL = 1e-9


def _as_array(value, shape: tuple, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsic matrix together with its native pixel resolution.

    ``k`` maps camera coordinates to pixel coordinates. The bottom row must
    be (0, 0, 1); a nonzero skew term k[0, 1] is allowed.
    """

    k: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        k = _as_array(self.k, (3, 3), "k")
        object.__setattr__(self, "k", k)
        if not (isinstance(self.width, (int, np.integer)) and self.width > 0):
            raise ValueError("width must be a positive integer")
        if not (isinstance(self.height, (int, np.integer)) and self.height > 0):
            raise ValueError("height must be a positive integer")
        if not (k[2, 0] == 0.0 and k[2, 1] == 0.0 and k[2, 2] == 1.0):
            raise ValueError("bottom row of k must be (0, 0, 1)")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0.0 <= k[0, 2] <= self.width):
            raise ValueError("principal point cx outside [0, width]")
        if not (0.0 <= k[1, 2] <= self.height):
            raise ValueError("principal point cy outside [0, height]")

    @classmethod
    def from_params(cls, fx: float, fy: float, cx: float, cy: float,
                    width: int, height: int) -> "Intrinsics":
        k = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
        return cls(k=k, width=width, height=height)

    @property
    def fx(self) -> float:
        return float(self.k[0, 0])

    @property
    def fy(self) -> float:
        return float(self.k[1, 1])

    @property
    def cx(self) -> float:
        return float(self.k[0, 2])

    @property
    def cy(self) -> float:
        return float(self.k[1, 2])

    def scaled_to(self, height: int, width: int) -> "Intrinsics":
        """Intrinsics for the same camera resampled to ``height x width``."""
        sx = width / self.width
        sy = height / self.height
        scale = np.array([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])
        return Intrinsics(k=scale @ self.k, width=width, height=height)


@dataclass(frozen=True)
class Extrinsics:
    """World-to-camera rigid transform: x_cam = r @ x_world + t."""

    r: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        r = _as_array(self.r, (3, 3), "r")
        t = _as_array(self.t, (3,), "t")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "t", t)
        if np.linalg.norm(r.T @ r - np.eye(3)) > ROTATION_TOL:
            raise ValueError("r is not orthonormal within tolerance")
        if abs(np.linalg.det(r) - 1.0) > ROTATION_TOL:
            raise ValueError("r must have determinant +1")

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(r=np.eye(3), t=np.zeros(3))

    @property
    def camera_center(self) -> np.ndarray:
        """Optical center in world coordinates."""
        return -self.r.T @ self.t

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply the world-to-camera map to (n, 3) points."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.r.T + self.t


@dataclass(frozen=True)
class CameraPose:
    intrinsics: Intrinsics
    extrinsics: Extrinsics
    frame_index: int = 0
    view_id: str = ""

    def __post_init__(self):
        if not (isinstance(self.frame_index, (int, np.integer)) and self.frame_index >= 0):
            raise ValueError("frame_index must be a non-negative integer")


@dataclass(frozen=True)
class Rig:
    """Named camera set with a left/right neighbor topology.

    ``neighbor_map`` maps view_id -> (left_neighbor, right_neighbor); either
    side may be None for open chains. The relation must be symmetric: if B is
    A's right neighbor then A must be B's left neighbor, and vice versa.
    """

    views: Tuple[str, ...]
    neighbor_map: Mapping[str, Tuple[Optional[str], Optional[str]]]

    def __post_init__(self):
        views = tuple(self.views)
        if len(set(views)) != len(views):
            raise ValueError("duplicate view ids in rig")
        nm = {str(k): (v[0], v[1]) for k, v in dict(self.neighbor_map).items()}
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "neighbor_map", MappingProxyType(nm))
        known = set(views)
        for view, (left, right) in nm.items():
            for v in (view, left, right):
                if v is not None and v not in known:
                    raise ValueError(f"neighbor_map references unknown view {v!r}")
            if right is not None:
                if nm.get(right, (None, None))[0] != view:
                    raise ValueError(
                        f"asymmetric neighbors: {right!r} is the right neighbor of "
                        f"{view!r} but does not list it as left neighbor")
            if left is not None:
                if nm.get(left, (None, None))[1] != view:
                    raise ValueError(
                        f"asymmetric neighbors: {left!r} is the left neighbor of "
                        f"{view!r} but does not list it as right neighbor")

    def neighbors(self, view: str) -> Tuple[Optional[str], Optional[str]]:
        return self.neighbor_map.get(view, (None, None))

    @classmethod
    def ring(cls, views: Sequence[str]) -> "Rig":
        """Closed ring topology in the given order: right = next, left = previous."""
        views = tuple(views)
        n = len(views)
        if n < 3:
            raise ValueError("a ring rig needs at least 3 views")
        nm = {views[i]: (views[(i - 1) % n], views[(i + 1) % n]) for i in range(n)}
        return cls(views=views, neighbor_map=nm)


def skew(v) -> np.ndarray:
    """Cross-product matrix: skew(v) @ w == cross(v, w)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def relative_pose(local: Extrinsics, neighbor: Extrinsics) -> Extrinsics:
    """Pose of ``local`` expressed in the camera frame of ``neighbor``.

    Returns extrinsics (R, t) such that x_local = R @ x_neighbor + t for any
    point expressed in the two camera frames. Equivalently, composing the
    result with ``neighbor`` recovers ``local``.
    """
    r = local.r @ neighbor.r.T
    t = local.t - r @ neighbor.t
    return Extrinsics(r=r, t=t)


def normalize_trajectory(poses: Sequence[Extrinsics]) -> list[Extrinsics]:
    """Re-anchor a trajectory so the first pose becomes the exact identity.

    Pose k of the output is pose k of the input expressed relative to pose 0
    (``relative_pose`` semantics). Normalizing twice is a no-op.
    """
    poses = list(poses)
    if not poses:
        raise ValueError("empty trajectory")
    first = poses[0]
    out = [Extrinsics.identity()]
    for pose in poses[1:]:
        out.append(relative_pose(pose, first))
    return out


def pixel_centers(intrinsics: Intrinsics, h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates of an (h, w) grid in native pixel units.

    Grid pixel (row i, col j) samples the point ((j + 0.5) * W/w,
    (i + 0.5) * H/h) of the native image, matching the usual resize
    convention. Returns (u, v) arrays of shape (h, w).
    """
    if h < 1 or w < 1:
        raise ValueError("grid dimensions must be >= 1")
    u = (np.arange(w) + 0.5) * (intrinsics.width / w)
    v = (np.arange(h) + 0.5) * (intrinsics.height / h)
    uu, vv = np.meshgrid(u, v)
    return uu, vv
