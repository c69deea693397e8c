"""Multi-view camera conditioning toolkit.

Pinhole camera algebra, per-pixel ray embeddings, epipolar cross-attention
masks, a reference zero-initialized pose-injection attention block with
analytic gradients, and success-rate-weighted trajectory metrics, plus the
file formats and CLI gluing them into a preprocessing pipeline.

Extrinsics convention throughout: world-to-camera, x_cam = R x_world + t.
"""

from .camera import (CameraPose, Extrinsics, Intrinsics, Rig,
                     normalize_trajectory, relative_pose, skew)
from .epipolar import (DegenerateGeometryError, EpipolarMask,
                       EpipolarResidualField, FundamentalMatrix,
                       epipolar_mask, fundamental_matrix, residual_field,
                       rig_masks, row_budget)
from .gradcheck import (DifferentiableOp, finite_difference_check,
                        inject_camera_op, linear_op,
                        masked_cross_attention_op, temporal_attention_op)
from .injection import (AttentionParams, InjectionBlockWeights, LatentFeature,
                        LinearMap, inject_camera, masked_cross_attention,
                        masked_softmax, softmax, temporal_attention)
from .metrics import (DropoutPolicy, EstimatedTrajectory,
                      TrajectoryEvalReport, evaluate_trajectories,
                      rotation_geodesic, sample_dropout)
from .plucker import (PluckerTensor, ResolutionPyramid, downsample_pyramid,
                      plucker_grid, plucker_trajectory)

__all__ = [
    "AttentionParams",
    "CameraPose",
    "DegenerateGeometryError",
    "DifferentiableOp",
    "DropoutPolicy",
    "EpipolarMask",
    "EpipolarResidualField",
    "EstimatedTrajectory",
    "Extrinsics",
    "FundamentalMatrix",
    "InjectionBlockWeights",
    "Intrinsics",
    "LatentFeature",
    "LinearMap",
    "PluckerTensor",
    "ResolutionPyramid",
    "Rig",
    "TrajectoryEvalReport",
    "downsample_pyramid",
    "epipolar_mask",
    "evaluate_trajectories",
    "finite_difference_check",
    "fundamental_matrix",
    "inject_camera",
    "inject_camera_op",
    "linear_op",
    "masked_cross_attention",
    "masked_cross_attention_op",
    "masked_softmax",
    "normalize_trajectory",
    "plucker_grid",
    "plucker_trajectory",
    "relative_pose",
    "residual_field",
    "rig_masks",
    "rotation_geodesic",
    "row_budget",
    "sample_dropout",
    "skew",
    "softmax",
    "temporal_attention",
    "temporal_attention_op",
]

__version__ = "0.1.0"
