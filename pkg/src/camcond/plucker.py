"""Per-pixel plucker-coordinate ray embeddings.

Each pixel of a camera at a target resolution is encoded as the 6-vector
(d, m): the unit world-space direction of the ray through the pixel center
and its moment m = c x d about the origin, where c is the optical center.
The moment is always perpendicular to the direction, and the encoded line
passes through the optical center by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .camera import CameraPose, Extrinsics, normalize_trajectory, pixel_centers

PLUCKER_TOL = 1e-9


@dataclass(frozen=True)
class PluckerTensor:
    """6-channel ray embedding grid of shape (frames, 6, h, w).

    Channels 0-2 hold the unit ray direction, channels 3-5 the moment.
    The poses the grid was derived from are retained so the embedding can be
    re-derived exactly at other resolutions.
    """

    data: np.ndarray
    poses: Tuple[CameraPose, ...]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 4 or data.shape[1] != 6:
            raise ValueError(f"expected shape (frames, 6, h, w), got {data.shape}")
        if min(data.shape) < 1:
            raise ValueError("all dimensions must be positive")
        if len(self.poses) != data.shape[0]:
            raise ValueError("pose count must match the frame dimension")
        d = data[:, 0:3]
        m = data[:, 3:6]
        norms = np.linalg.norm(d, axis=1)
        if np.abs(norms - 1.0).max() > PLUCKER_TOL:
            raise ValueError("direction channels are not unit length")
        if np.abs(np.einsum("fchw,fchw->fhw", d, m)).max() > PLUCKER_TOL:
            raise ValueError("moment channels are not perpendicular to directions")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "poses", tuple(self.poses))

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def h(self) -> int:
        return self.data.shape[2]

    @property
    def w(self) -> int:
        return self.data.shape[3]


@dataclass(frozen=True)
class ResolutionPyramid:
    """Strictly decreasing resolution levels, each the floor-half of the last."""

    levels: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        levels = tuple((int(h), int(w)) for h, w in self.levels)
        if not levels:
            raise ValueError("pyramid needs at least one level")
        for h, w in levels:
            if h < 1 or w < 1:
                raise ValueError("all pyramid dimensions must be >= 1")
        for (h0, w0), (h1, w1) in zip(levels, levels[1:]):
            if (h1, w1) != (h0 // 2, w0 // 2):
                raise ValueError(
                    f"level ({h1}, {w1}) is not the floor-half of ({h0}, {w0})")
            if h1 >= h0 or w1 >= w0:
                raise ValueError("pyramid levels must strictly decrease")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def from_base(cls, h: int, w: int, n_levels: int) -> "ResolutionPyramid":
        levels = [(h, w)]
        for _ in range(n_levels - 1):
            h, w = h // 2, w // 2
            levels.append((h, w))
        return cls(levels=tuple(levels))


def _grid_rays(pose: CameraPose, h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit world directions and moments for every pixel center, shape (3, h, w)."""
    uu, vv = pixel_centers(pose.intrinsics, h, w)
    homog = np.stack([uu, vv, np.ones_like(uu)], axis=0)  # (3, h, w)
    k_inv = np.linalg.inv(pose.intrinsics.k)
    cam_dirs = np.einsum("ij,jhw->ihw", k_inv, homog)
    # world direction: camera-to-world rotation is the transpose of the
    # stored world-to-camera rotation
    world_dirs = np.einsum("ij,jhw->ihw", pose.extrinsics.r.T, cam_dirs)
    world_dirs = world_dirs / np.linalg.norm(world_dirs, axis=0, keepdims=True)
    center = pose.extrinsics.camera_center
    moments = np.cross(np.broadcast_to(center[:, None, None], world_dirs.shape),
                       world_dirs, axis=0)
    return world_dirs, moments


def plucker_grid(pose: CameraPose, h: int, w: int) -> PluckerTensor:
    """Single-frame ray embedding of ``pose`` rendered at resolution (h, w)."""
    dirs, moments = _grid_rays(pose, h, w)
    data = np.concatenate([dirs, moments], axis=0)[None]  # (1, 6, h, w)
    return PluckerTensor(data=data, poses=(pose,))


def plucker_trajectory(poses: Sequence[CameraPose], h: int, w: int,
                       normalize_to_first: bool = True) -> PluckerTensor:
    """Ray embedding for a single-view trajectory, one frame per pose.

    With ``normalize_to_first`` the extrinsics are first re-anchored to the
    initial pose, so frame 0 carries the canonical identity-camera grid with
    zero moments.
    """
    poses = list(poses)
    if not poses:
        raise ValueError("empty trajectory")
    view_ids = {p.view_id for p in poses}
    if len(view_ids) != 1:
        raise ValueError(f"mixed view_ids in trajectory: {sorted(view_ids)}")
    if normalize_to_first:
        rebased = normalize_trajectory([p.extrinsics for p in poses])
        poses = [CameraPose(intrinsics=p.intrinsics, extrinsics=e,
                            frame_index=p.frame_index, view_id=p.view_id)
                 for p, e in zip(poses, rebased)]
    frames = [np.concatenate(_grid_rays(p, h, w), axis=0) for p in poses]
    return PluckerTensor(data=np.stack(frames, axis=0), poses=tuple(poses))


def downsample_pyramid(tensor: PluckerTensor,
                       pyramid: ResolutionPyramid) -> list[PluckerTensor]:
    """Re-derive the embedding at every pyramid level.

    Rays are recomputed analytically from the tensor's source poses at each
    level rather than averaged, so every level satisfies the same incidence
    and perpendicularity guarantees as the original.
    """
    for h, w in pyramid.levels:
        if h > tensor.h or w > tensor.w:
            raise ValueError(
                f"pyramid level ({h}, {w}) larger than source ({tensor.h}, {tensor.w})")
    out = []
    for h, w in pyramid.levels:
        frames = [np.concatenate(_grid_rays(p, h, w), axis=0) for p in tensor.poses]
        out.append(PluckerTensor(data=np.stack(frames, axis=0), poses=tensor.poses))
    return out
