"""Synthetic cameras, rigs, and trajectories for tests and demos.

Everything here is deterministic given an rng or explicit parameters.
Conventions match the rest of the package: extrinsics map world points into
the camera frame.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .camera import CameraPose, Extrinsics, Intrinsics, Rig


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix via a normalized quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def look_at(center: np.ndarray, target: np.ndarray,
            up: Sequence[float] = (0.0, 0.0, 1.0)) -> Extrinsics:
    """World-to-camera pose for a camera at `center` looking at `target`.

    Camera axes: +z forward (toward target), +x right, +y down, so the
    projection of a point in front of the camera has positive depth.
    """
    center = np.asarray(center, dtype=float)
    target = np.asarray(target, dtype=float)
    forward = target - center
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise ValueError("camera center and target coincide")
    forward = forward / n
    up = np.asarray(up, dtype=float)
    right = np.cross(forward, up)
    n = np.linalg.norm(right)
    if n < 1e-12:
        raise ValueError("view direction parallel to up vector")
    right = right / n
    down = np.cross(forward, right)
    r = np.stack([right, down, forward], axis=0)
    return Extrinsics(r=r, t=-r @ center)


def random_extrinsics(rng: np.random.Generator,
                      translation_scale: float = 1.0) -> Extrinsics:
    return Extrinsics(r=random_rotation(rng),
                      t=rng.normal(scale=translation_scale, size=3))


def default_intrinsics(width: int = 64, height: int = 64,
                       focal: float = 80.0) -> Intrinsics:
    return Intrinsics.from_params(fx=focal, fy=focal,
                                  cx=width / 2.0, cy=height / 2.0,
                                  width=width, height=height)


def random_intrinsics(rng: np.random.Generator,
                      width: int = 64, height: int = 64) -> Intrinsics:
    focal = float(rng.uniform(0.8, 2.5)) * max(width, height)
    cx = width / 2.0 + float(rng.uniform(-2.0, 2.0))
    cy = height / 2.0 + float(rng.uniform(-2.0, 2.0))
    return Intrinsics.from_params(fx=focal, fy=focal * float(rng.uniform(0.95, 1.05)),
                                  cx=cx, cy=cy, width=width, height=height)


def ring_rig(n_views: int = 6, radius: float = 1.5,
             ) -> tuple[Rig, dict[str, Extrinsics]]:
    """Outward-looking camera ring like a surround-view driving rig.

    Returns the rig (views + left/right neighbor relation) and the
    extrinsics of each view at the rig origin.
    """
    if n_views < 3:
        raise ValueError("ring rig needs at least 3 views")
    view_ids = [f"cam{i}" for i in range(n_views)]
    rig = Rig.ring(view_ids)
    extrinsics = {}
    for i, view in enumerate(view_ids):
        angle = 2.0 * math.pi * i / n_views
        center = np.array([radius * math.cos(angle), radius * math.sin(angle), 0.0])
        target = center + np.array([math.cos(angle), math.sin(angle), 0.0])
        extrinsics[view] = look_at(center, target)
    return rig, extrinsics


def rig_poses(rig: Rig, extrinsics: dict[str, Extrinsics],
              frame_index: int = 0,
              intrinsics: Optional[Intrinsics] = None) -> dict[str, CameraPose]:
    intr = intrinsics if intrinsics is not None else default_intrinsics()
    return {view: CameraPose(intrinsics=intr, extrinsics=extrinsics[view],
                             frame_index=frame_index, view_id=view)
            for view in rig.views}


def dolly_trajectory(n_frames: int, step: float = 0.1,
                     intrinsics: Optional[Intrinsics] = None,
                     view_id: str = "cam0",
                     yaw_per_frame: float = 0.0) -> list[CameraPose]:
    """Forward dolly with optional constant yaw, starting at the origin."""
    if n_frames < 1:
        raise ValueError("need at least one frame")
    intr = intrinsics if intrinsics is not None else default_intrinsics()
    poses = []
    center = np.zeros(3)
    heading = 0.0
    for i in range(n_frames):
        direction = np.array([math.cos(heading), math.sin(heading), 0.0])
        ext = look_at(center, center + direction)
        poses.append(CameraPose(intrinsics=intr, extrinsics=ext,
                                frame_index=i, view_id=view_id))
        center = center + step * direction
        heading += yaw_per_frame
    return poses


def two_view_scene(rng: np.random.Generator,
                   n_points: int = 50,
                   baseline: float = 0.5,
                   width: int = 64, height: int = 64,
                   ) -> tuple[CameraPose, CameraPose, np.ndarray]:
    """Two cameras with overlapping frusta plus world points seen by both.

    The points are scattered in front of the midpoint of the two cameras so
    epipolar constraints can be checked on real correspondences.
    """
    intr = default_intrinsics(width=width, height=height)
    jitter = rng.normal(scale=0.05, size=3)
    c0 = np.array([-baseline / 2.0, 0.0, 0.0])
    c1 = np.array([baseline / 2.0, 0.0, 0.0]) + jitter
    target = np.array([0.0, 4.0, 0.0])
    pose0 = CameraPose(intrinsics=intr, extrinsics=look_at(c0, target),
                       frame_index=0, view_id="left")
    pose1 = CameraPose(intrinsics=intr, extrinsics=look_at(c1, target),
                       frame_index=0, view_id="right")
    points = target + rng.uniform(-1.5, 1.5, size=(n_points, 3))
    return pose0, pose1, points


def canonical_stereo(baseline: float = 0.5,
                     width: int = 64, height: int = 64,
                     focal: float = 80.0) -> tuple[CameraPose, CameraPose]:
    """Axis-aligned stereo pair: identical rotation, pure x translation."""
    intr = default_intrinsics(width=width, height=height, focal=focal)
    left = CameraPose(intrinsics=intr, extrinsics=Extrinsics.identity(),
                      frame_index=0, view_id="left")
    right = CameraPose(
        intrinsics=intr,
        extrinsics=Extrinsics(r=np.eye(3), t=np.array([-baseline, 0.0, 0.0])),
        frame_index=0, view_id="right")
    return left, right


def project(pose: CameraPose, points: np.ndarray) -> np.ndarray:
    """Pixel coordinates of world points, native resolution, (n, 2)."""
    cam = pose.extrinsics.transform(points)
    depth = cam[:, 2]
    if np.any(depth <= 0):
        raise ValueError("point behind camera")
    uv = cam[:, :2] / depth[:, None]
    k = pose.intrinsics.k
    return uv * np.array([k[0, 0], k[1, 1]]) + np.array([k[0, 2], k[1, 2]])
