"""Trajectory error metrics and the condition-dropout sampler.

Rotation and translation errors are aggregated over estimated trajectories
with success-rate weighting: per-sample errors (mean over frames) are summed
over the samples the estimator handled and divided by the fraction it
handled, so uncontrollable outputs that defeat estimation are penalized.
Both trajectories are re-anchored to their first frame and translations are
scaled to unit norm per trajectory, making the metric invariant to global
rigid motion and to scale.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .camera import Extrinsics, normalize_trajectory

DISPLACEMENT_TOL = 1e-12


def rotation_geodesic(r_gen: np.ndarray, r_gt: np.ndarray) -> float:
    """Angle in [0, pi] of the relative rotation between two rotation matrices.

    The arccos argument is clamped so matrices that are orthonormal only to
    tolerance cannot produce NaN. Equal matrices short-circuit to exactly
    0.0: arccos near 1 is so steep that the one-ulp debris of R R^T would
    otherwise turn identical inputs into ~1e-8.
    """
    r_gen = np.asarray(r_gen, dtype=float)
    r_gt = np.asarray(r_gt, dtype=float)
    if np.array_equal(r_gen, r_gt):
        return 0.0
    cos = (np.trace(r_gen @ r_gt.T) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, cos)))


@dataclass(frozen=True)
class EstimatedTrajectory:
    """Pose-estimator output for one sample; absent frames mean it failed."""

    frames: Tuple[Optional[Extrinsics], ...]
    sample_id: str

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))

    @property
    def succeeded(self) -> bool:
        return len(self.frames) > 0 and all(f is not None for f in self.frames)

    @classmethod
    def failed(cls, sample_id: str) -> "EstimatedTrajectory":
        return cls(frames=(), sample_id=sample_id)


@dataclass(frozen=True)
class TrajectoryEvalReport:
    rot_err: float
    trans_err: float
    success_rate: float
    n_samples: int
    n_success: int
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")
        if not (0 <= self.n_success <= self.n_samples):
            raise ValueError("n_success out of range")
        if self.success_rate != self.n_success / self.n_samples:
            raise ValueError("success_rate must equal n_success / n_samples")
        if self.n_success > 0 and not (math.isfinite(self.rot_err)
                                       and math.isfinite(self.trans_err)):
            raise ValueError("errors must be finite when any sample succeeded")


def _normalized_translations(poses: Sequence[Extrinsics]) -> tuple[np.ndarray, bool]:
    """Stacked first-frame-relative translations scaled to unit norm.

    Returns (translations, had_displacement). Zero-displacement trajectories
    are returned unscaled with the flag false.
    """
    rel = normalize_trajectory(poses)
    t = np.stack([p.t for p in rel], axis=0)
    norm = float(np.linalg.norm(t))
    if norm <= DISPLACEMENT_TOL:
        return t, False
    return t / norm, True


def evaluate_trajectories(gen: Sequence[EstimatedTrajectory],
                          gt: Sequence[Sequence[Extrinsics]]) -> TrajectoryEvalReport:
    """Success-rate-weighted rotation and translation errors.

    Every sample counts toward the success rate; only successful samples
    contribute errors. Per sample, both trajectories are re-anchored to
    their first frame, translations are scaled to unit norm, per-frame
    errors are averaged, and the per-sample means are summed and divided by
    the success rate. Ground-truth trajectories with zero displacement have
    no defined translation error and are excluded from the translation sum
    with a warning.
    """
    gen = list(gen)
    gt = [list(s) for s in gt]
    if len(gen) != len(gt):
        raise ValueError(f"sample counts differ: {len(gen)} generated vs "
                         f"{len(gt)} ground truth")
    if not gen:
        raise ValueError("no samples to evaluate")
    n_samples = len(gen)
    n_success = 0
    rot_sum = 0.0
    trans_sum = 0.0
    warnings: list[str] = []
    for est, truth in zip(gen, gt):
        if not est.succeeded:
            continue
        frames = [f for f in est.frames]
        if len(frames) != len(truth):
            raise ValueError(
                f"sample {est.sample_id!r}: {len(frames)} estimated frames vs "
                f"{len(truth)} ground-truth frames")
        n_success += 1
        gen_rel = normalize_trajectory(frames)
        gt_rel = normalize_trajectory(truth)
        rot_sum += float(np.mean([
            rotation_geodesic(a.r, b.r) for a, b in zip(gen_rel, gt_rel)]))
        t_gen, _ = _normalized_translations(frames)
        t_gt, gt_moved = _normalized_translations(truth)
        if not gt_moved:
            warnings.append(
                f"sample {est.sample_id!r}: ground truth has zero displacement, "
                "translation error undefined; excluded")
            continue
        trans_sum += float(np.mean(np.linalg.norm(t_gen - t_gt, axis=1)))
    success_rate = n_success / n_samples
    if n_success == 0:
        rot_err = float("nan")
        trans_err = float("nan")
    else:
        rot_err = rot_sum / success_rate
        trans_err = trans_sum / success_rate
    return TrajectoryEvalReport(
        rot_err=rot_err, trans_err=trans_err, success_rate=success_rate,
        n_samples=n_samples, n_success=n_success, warnings=tuple(warnings))


DEFAULT_CONDITION_PROB = 0.40
DEFAULT_NEIGHBOR_PROB = 0.50
NEIGHBOR_CONDITION = "neighbor_view"


@dataclass(frozen=True)
class DropoutPolicy:
    """Per-condition drop probabilities plus the seed of the sampler.

    The neighbor-view condition is dropped more aggressively than the
    others because at inference it is only available for half the views.
    """

    per_condition_prob: Mapping[str, float]
    neighbor_view_prob: float = DEFAULT_NEIGHBOR_PROB
    seed: int = 0

    def __post_init__(self):
        probs = dict(self.per_condition_prob)
        for name, p in probs.items():
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"probability for {name!r} outside [0, 1]")
        if not (0.0 <= self.neighbor_view_prob <= 1.0):
            raise ValueError("neighbor_view_prob outside [0, 1]")
        if NEIGHBOR_CONDITION in probs:
            raise ValueError(f"{NEIGHBOR_CONDITION!r} is configured separately")
        object.__setattr__(self, "per_condition_prob", MappingProxyType(probs))

    @classmethod
    def defaults(cls, seed: int = 0) -> "DropoutPolicy":
        return cls(per_condition_prob={"first_frame": DEFAULT_CONDITION_PROB,
                                       "bev_map": DEFAULT_CONDITION_PROB,
                                       "boxes_3d": DEFAULT_CONDITION_PROB},
                   neighbor_view_prob=DEFAULT_NEIGHBOR_PROB, seed=seed)

    def all_probs(self) -> dict[str, float]:
        out = dict(self.per_condition_prob)
        out[NEIGHBOR_CONDITION] = self.neighbor_view_prob
        return out


def _unit_draw(seed: int, step: int, name: str) -> float:
    """Deterministic uniform in [0, 1) keyed by (seed, step, name)."""
    digest = hashlib.blake2b(
        f"{step}:{name}".encode(),
        key=(seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"),
        digest_size=8,
    ).digest()
    return int.from_bytes(digest, "little") / 2.0 ** 64


def sample_dropout(policy: DropoutPolicy, step: int) -> dict[str, bool]:
    """Condition-name -> dropped decision for one training step.

    A pure function of (seed, step, condition-name): the same policy and
    step always produce the same decisions, in any process.
    """
    return {name: _unit_draw(policy.seed, step, name) < prob
            for name, prob in policy.all_probs().items()}
