"""Built-in verification suites runnable from the CLI.

Four quick numerical checks at small sizes: the zero-initialized injection
block leaves activations bit-identical, ray grids satisfy the line
incidence identities, fundamental matrices annihilate projected
correspondences, and analytic gradients match central differences. Used by
`selfcheck` on the command line and as a smoke test in CI.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

import numpy as np

from .camera import CameraPose
from .epipolar import EpipolarMask, fundamental_matrix
from .gradcheck import (finite_difference_check, inject_camera_op,
                        masked_cross_attention_op, temporal_attention_op)
from .injection import (AttentionParams, InjectionBlockWeights, LatentFeature,
                        inject_camera, temporal_attention)
from .plucker import plucker_grid, plucker_trajectory
from .synth import (default_intrinsics, dolly_trajectory, project,
                    random_extrinsics, two_view_scene)

INCIDENCE_TOL = 1e-9
EPIPOLAR_TOL = 1e-9
GRAD_TOL = 1e-4


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        if self.passed:
            return f"{self.name}: PASS"
        return f"{self.name}: FAIL ({self.detail})"


def _random_pose(rng: np.random.Generator, frame_index: int = 0,
                 view_id: str = "cam0") -> CameraPose:
    return CameraPose(intrinsics=default_intrinsics(),
                      extrinsics=random_extrinsics(rng),
                      frame_index=frame_index, view_id=view_id)


def check_zero_init(rng: np.random.Generator, n_trials: int = 4) -> SuiteResult:
    """Fresh injection weights must leave the pretrained path untouched."""
    h, w, channels, frames = 3, 3, 4, 2
    for trial in range(n_trials):
        poses = dolly_trajectory(frames)
        p = plucker_trajectory(poses, h, w)
        z = LatentFeature(rng.normal(size=(frames, channels, h, w)))
        weights = InjectionBlockWeights.initialize(channels, heads=2,
                                                   seed=int(rng.integers(1 << 31)))
        injected = inject_camera(z, p, weights)
        baseline = temporal_attention(z, weights.temporal_attn_pretrained)
        if not np.array_equal(injected.data, baseline.data):
            return SuiteResult("zero-init-identity", False,
                               f"trial {trial}: outputs differ")
    return SuiteResult("zero-init-identity", True)


def check_incidence(rng: np.random.Generator, n_trials: int = 8) -> SuiteResult:
    """Every stored ray must pass through its camera's optical center."""
    h, w = 4, 4
    for trial in range(n_trials):
        pose = _random_pose(rng)
        grid = plucker_grid(pose, h, w).data[0]
        d = grid[:3].reshape(3, -1)
        m = grid[3:].reshape(3, -1)
        center = pose.extrinsics.camera_center
        dist = np.linalg.norm(np.cross(center[None, :], d.T) - m.T, axis=1)
        perp = np.abs(np.einsum("ij,ij->j", d, m))
        unit = np.abs(np.linalg.norm(d, axis=0) - 1.0)
        worst = max(dist.max(), perp.max(), unit.max())
        if worst > INCIDENCE_TOL:
            return SuiteResult("plucker-incidence", False,
                               f"trial {trial}: max deviation {worst:.3e}")
    return SuiteResult("plucker-incidence", True)


def check_fundamental(rng: np.random.Generator, n_trials: int = 8) -> SuiteResult:
    """|x_L^T F x_N| on true correspondences, normalized homogeneous points."""
    for trial in range(n_trials):
        left, right, points = two_view_scene(rng, n_points=20)
        f = fundamental_matrix(left, right)
        uv_l = project(left, points)
        uv_n = project(right, points)
        x_l = np.concatenate([uv_l, np.ones((len(points), 1))], axis=1)
        x_n = np.concatenate([uv_n, np.ones((len(points), 1))], axis=1)
        residual = np.abs(np.einsum("ni,ij,nj->n", x_l, f.f, x_n)).max()
        if residual > EPIPOLAR_TOL:
            return SuiteResult("fundamental-oracle", False,
                               f"trial {trial}: max residual {residual:.3e}")
    return SuiteResult("fundamental-oracle", True)


def check_gradients(rng: np.random.Generator) -> SuiteResult:
    """Analytic gradients vs central differences for the attention ops."""
    frames, channels, h, w = 2, 4, 2, 2
    z = LatentFeature(rng.normal(size=(frames, channels, h, w)))
    params = AttentionParams.create(channels, heads=2, seed=7)
    poses = dolly_trajectory(frames)
    p = plucker_trajectory(poses, h, w)
    weights = InjectionBlockWeights.initialize(channels, heads=2, seed=3)
    cond = rng.normal(size=(frames, channels, h, 2 * w))
    bits = np.ones((h * w, 2 * h * w), dtype=bool)
    bits[:, ::3] = False
    mask = EpipolarMask(bits=bits, h=h, w=w, ratio=0.5)
    ops = [temporal_attention_op(z, params),
           inject_camera_op(z, p, weights),
           masked_cross_attention_op(z, cond, mask, params)]
    for op in ops:
        err = finite_difference_check(op)
        if err > GRAD_TOL:
            return SuiteResult("gradient-check", False,
                               f"{op.name}: relative error {err:.3e}")
    return SuiteResult("gradient-check", True)


def run_all(seed: int = 0) -> list[SuiteResult]:
    suites: Sequence[Callable[[np.random.Generator], SuiteResult]] = (
        check_zero_init, check_incidence, check_fundamental, check_gradients)
    results = []
    for suite in suites:
        results.append(suite(np.random.default_rng(seed)))
    return results


def run_and_report(stream: TextIO, seed: int = 0) -> int:
    """Print one line per suite; return the number of failures."""
    results = run_all(seed=seed)
    for result in results:
        print(result.line(), file=stream)
    return sum(not r.passed for r in results)
