"""Command-line pipeline driver.

Subcommands cover the preprocessing artifacts (ray-embedding tensors,
attention mask files, fundamental matrices, relative poses), trajectory
evaluation, the dropout schedule, and the built-in verification suites.

Exit codes: 0 success, 1 usage error, 2 validation error (bad files or
parameters), 3 numerical or degenerate-geometry error. Set CAMCOND_LOG to
debug/info/warning/error to control log verbosity on stderr. All output is
deterministic: identical inputs and flags give byte-identical stdout and
files.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from typing import Optional, Sequence

from . import formats, selfcheck
from .camera import CameraPose, relative_pose
from .epipolar import (DegenerateGeometryError, epipolar_mask,
                       fundamental_matrix, residual_field)
from .metrics import DropoutPolicy, evaluate_trajectories, sample_dropout
from .plucker import plucker_trajectory

USAGE_ERROR = 1
VALIDATION_ERROR = 2
NUMERICAL_ERROR = 3

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse's default usage-error exit code is 2; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def _configure_logging() -> None:
    level_name = os.environ.get("CAMCOND_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _positive(value: int, name: str) -> int:
    if value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")
    return value


def _pose_at(content: formats.PoseFileContent, view: str,
             frame: int) -> CameraPose:
    trajectory = content.trajectory(view)
    for pose in trajectory:
        if pose.frame_index == frame:
            return pose
    raise ValueError(f"view {view!r} has no frame {frame}")


def _cmd_plucker(args) -> int:
    content = formats.read_pose_file(args.pose_file)
    _positive(args.height, "--height")
    _positive(args.width, "--width")
    poses = content.trajectory(args.view)
    tensor = plucker_trajectory(poses, args.height, args.width,
                                normalize_to_first=args.normalize_first_frame)
    formats.write_tensor(args.out, tensor.data)
    print(f"wrote {args.out}: shape {tensor.data.shape}")
    return 0


def _cmd_fundamental(args) -> int:
    content = formats.read_pose_file(args.pose_file)
    local = _pose_at(content, args.view, args.frame)
    neighbor = _pose_at(content, args.neighbor, args.frame)
    f = fundamental_matrix(local, neighbor, paper_literal=args.paper_literal_f)
    for row in f.f:
        print(" ".join(_fmt(x) for x in row))
    if args.out is not None:
        formats.write_tensor(args.out, f.f)
    return 0


def _cmd_mask(args) -> int:
    content = formats.read_pose_file(args.pose_file)
    _positive(args.height, "--height")
    _positive(args.width, "--width")
    if content.rig is None:
        raise ValueError("pose file declares no neighbors")
    left_id, right_id = content.rig.neighbors(args.view)
    if left_id is None and right_id is None:
        raise ValueError(f"no neighbors declared for view {args.view!r}")
    if left_id is None or right_id is None:
        missing = "left" if left_id is None else "right"
        raise ValueError(f"view {args.view!r} lacks a {missing} neighbor")
    local = _pose_at(content, args.view, args.frame)
    f_left = fundamental_matrix(local, _pose_at(content, left_id, args.frame),
                                paper_literal=args.paper_literal_f)
    f_right = fundamental_matrix(local, _pose_at(content, right_id, args.frame),
                                 paper_literal=args.paper_literal_f)
    field = residual_field(f_left, f_right, args.height, args.width)
    mask = epipolar_mask(field, args.ratio, mode=args.tau_mode)
    formats.write_mask(args.out, mask)
    print(f"wrote {args.out}: {mask.bits.shape[0]}x{mask.bits.shape[1]} bits, "
          f"{int(mask.bits.sum())} set")
    if args.pgm is not None:
        formats.write_mask_pgm(args.pgm, mask)
        print(f"wrote {args.pgm}")
    return 0


def _cmd_relpose(args) -> int:
    content = formats.read_pose_file(args.pose_file)
    local = _pose_at(content, args.view, args.frame)
    neighbor = _pose_at(content, args.neighbor, args.frame)
    rel = relative_pose(local.extrinsics, neighbor.extrinsics)
    for row in rel.r:
        print("R " + " ".join(_fmt(x) for x in row))
    print("t " + " ".join(_fmt(x) for x in rel.t))
    return 0


def _cmd_eval(args) -> int:
    gen = formats.read_trajectory_file(args.gen)
    gt = formats.ground_truth_trajectories(
        formats.read_trajectory_file(args.gt))
    report = evaluate_trajectories(gen, gt)
    for warning in report.warnings:
        logger.warning("%s", warning)

    def show(value: float) -> str:
        return "undefined" if math.isnan(value) else _fmt(value)

    print(f"rot_err={show(report.rot_err)}")
    print(f"trans_err={show(report.trans_err)}")
    print(f"success_rate={_fmt(report.success_rate)}")
    print(f"n_samples={report.n_samples}")
    print(f"n_success={report.n_success}")
    if args.json is not None:
        doc = {
            "rot_err": None if math.isnan(report.rot_err) else report.rot_err,
            "trans_err": None if math.isnan(report.trans_err) else report.trans_err,
            "success_rate": report.success_rate,
            "n_samples": report.n_samples,
            "n_success": report.n_success,
            "warnings": list(report.warnings),
        }
        payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        formats.atomic_write_bytes(args.json, payload.encode("utf-8"))
    return 0


def _cmd_dropout_schedule(args) -> int:
    _positive(args.steps, "--steps")
    if args.start < 0:
        raise ValueError(f"--start must be non-negative, got {args.start}")
    policy = DropoutPolicy.defaults(seed=args.seed)
    names = list(policy.all_probs())
    counts = {name: 0 for name in names}
    for step in range(args.start, args.start + args.steps):
        decisions = sample_dropout(policy, step)
        for name in names:
            counts[name] += decisions[name]
        if not args.quiet:
            cols = " ".join(f"{name}={int(decisions[name])}" for name in names)
            print(f"step={step} {cols}")
    if args.summarize:
        for name in names:
            print(f"freq {name}={_fmt(counts[name] / args.steps)}")
    return 0


def _cmd_selfcheck(args) -> int:
    failures = selfcheck.run_and_report(sys.stdout, seed=args.seed)
    return 0 if failures == 0 else NUMERICAL_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="camcond",
                     description="multi-view camera conditioning toolkit")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("plucker", help="write a ray-embedding tensor file")
    p.add_argument("pose_file")
    p.add_argument("--view", required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--normalize-first-frame",
                   action=argparse.BooleanOptionalAction, default=True,
                   help="re-anchor the trajectory to its first frame")
    p.set_defaults(func=_cmd_plucker)

    p = sub.add_parser("fundamental",
                       help="print the neighbor-to-local fundamental matrix")
    p.add_argument("pose_file")
    p.add_argument("--view", required=True)
    p.add_argument("--neighbor", required=True)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--paper-literal-F", dest="paper_literal_f",
                   action="store_true",
                   help="use the uncorrected composition (compatibility)")
    p.add_argument("--out", default=None,
                   help="also write the 3x3 matrix as a tensor file")
    p.set_defaults(func=_cmd_fundamental)

    p = sub.add_parser("mask", help="write an epipolar attention mask file")
    p.add_argument("pose_file")
    p.add_argument("--view", required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratio", type=float, default=0.25,
                   help="fraction of keys kept per query (default 0.25)")
    p.add_argument("--tau-mode", choices=("per-row", "global"),
                   default="per-row",
                   help="threshold per query row or over the whole grid")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--paper-literal-F", dest="paper_literal_f",
                   action="store_true")
    p.add_argument("--pgm", default=None,
                   help="also write a graymap rendition for inspection")
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("relpose", help="print the relative pose of two views")
    p.add_argument("pose_file")
    p.add_argument("--view", required=True)
    p.add_argument("--neighbor", required=True)
    p.add_argument("--frame", type=int, default=0)
    p.set_defaults(func=_cmd_relpose)

    p = sub.add_parser("eval", help="evaluate estimated trajectories")
    p.add_argument("--gen", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--json", default=None,
                   help="also write the report as a JSON document")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("dropout-schedule",
                       help="print the deterministic condition-dropout plan")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--summarize", action="store_true",
                   help="print empirical drop frequencies at the end")
    p.add_argument("--quiet", action="store_true",
                   help="suppress per-step lines")
    p.set_defaults(func=_cmd_dropout_schedule)

    p = sub.add_parser("selfcheck", help="run the built-in verification suites")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_selfcheck)

    return parser


def entry(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except DegenerateGeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return VALIDATION_ERROR
