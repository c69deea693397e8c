#!/usr/bin/env python3
"""Regenerate the checked-in fixtures under fixtures/.

Deterministic: running this twice produces byte-identical files. The
fixtures model the two dataset shapes the pipeline targets: a six-camera
surround ring with a short forward drive, and a single-camera 14-frame
clip, plus a colinear three-camera rig whose epipolar lines are exactly
horizontal (handy for mask geometry checks) and trajectory pairs for the
evaluation metrics.
"""

from __future__ import annotations

import math
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from camcond.camera import CameraPose, Extrinsics, Rig
from camcond.formats import (PoseFileContent, write_pose_file,
                             write_trajectory_file)
from camcond.metrics import EstimatedTrajectory
from camcond.synth import default_intrinsics, dolly_trajectory, ring_rig

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def ring6() -> PoseFileContent:
    rig, base = ring_rig(n_views=6, radius=1.5)
    intr = default_intrinsics(width=64, height=64, focal=80.0)
    trajectories = {}
    for view in rig.views:
        poses = []
        for k in range(3):
            # whole rig drives forward along +x, 0.5 units per frame
            offset = np.array([0.5 * k, 0.0, 0.0])
            r = base[view].r
            center = base[view].camera_center + offset
            poses.append(CameraPose(
                intrinsics=intr, extrinsics=Extrinsics(r=r, t=-r @ center),
                frame_index=k, view_id=view))
        trajectories[view] = tuple(poses)
    return PoseFileContent(intrinsics={v: intr for v in rig.views},
                           trajectories=trajectories, rig=rig)


def forward14() -> PoseFileContent:
    intr = default_intrinsics(width=96, height=54, focal=120.0)
    poses = dolly_trajectory(14, step=0.25, intrinsics=intr,
                             view_id="cam0", yaw_per_frame=math.radians(2.0))
    return PoseFileContent(intrinsics={"cam0": intr},
                           trajectories={"cam0": tuple(poses)}, rig=None)


def stereo3() -> PoseFileContent:
    """Colinear cameras at x = -b, 0, +b, identity rotations.

    Epipolar lines between any pair are horizontal pixel rows, so the
    zero-residual key set of a mask row is known in closed form.
    """
    intr = default_intrinsics(width=32, height=32, focal=40.0)
    baseline = 0.4
    centers = {"nleft": -baseline, "center": 0.0, "nright": baseline}
    trajectories = {}
    for view, x in centers.items():
        ext = Extrinsics(r=np.eye(3), t=np.array([-x, 0.0, 0.0]))
        trajectories[view] = (CameraPose(intrinsics=intr, extrinsics=ext,
                                         frame_index=0, view_id=view),)
    rig = Rig.ring(["nleft", "center", "nright"])
    return PoseFileContent(intrinsics={v: intr for v in centers},
                           trajectories=trajectories, rig=rig)


def eval_fixtures() -> dict[str, list[EstimatedTrajectory]]:
    gt_poses = [p.extrinsics for p in dolly_trajectory(8, step=0.3)]
    gt = [EstimatedTrajectory(frames=tuple(gt_poses), sample_id="s0"),
          EstimatedTrajectory(frames=tuple(gt_poses), sample_id="s1")]

    # frame 0 stays put: a perturbation of the anchor frame would cancel
    # under first-frame normalization
    angle = math.radians(5.0)
    c, s = math.cos(angle), math.sin(angle)
    r_y = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    rot5_frames = tuple(
        e if k == 0 else Extrinsics(r=r_y @ e.r, t=e.t)
        for k, e in enumerate(gt_poses))
    rot5 = [EstimatedTrajectory(frames=rot5_frames, sample_id=sid)
            for sid in ("s0", "s1")]

    return {
        "eval_gt.traj": gt,
        "eval_gen_identical.traj": gt,
        "eval_gen_one_failed.traj": [gt[0], EstimatedTrajectory.failed("s1")],
        "eval_gen_rot5.traj": rot5,
        "eval_gen_rot5_one_failed.traj": [rot5[0],
                                          EstimatedTrajectory.failed("s1")],
    }


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    write_pose_file(FIXTURES / "ring6.poses", ring6())
    write_pose_file(FIXTURES / "forward14.poses", forward14())
    write_pose_file(FIXTURES / "stereo3.poses", stereo3())
    for name, samples in eval_fixtures().items():
        write_trajectory_file(FIXTURES / name, samples)
    for path in sorted(FIXTURES.iterdir()):
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
