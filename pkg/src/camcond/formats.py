"""On-disk formats: pose text files, binary tensors, bit-packed masks.

Pose file (line-oriented, ``#`` starts a comment, blank lines ignored):

    view <id> <width> <height> <fx> <fy> <cx> <cy>
    frame <id> <frame_index> <r00 r01 r02 r10 r11 r12 r20 r21 r22> <t0 t1 t2>
    neighbors <id> <left|-> <right|->

Extrinsics are world-to-camera, R row-major. ``-`` marks a missing
neighbor. Every parse failure carries the offending line number.

Tensor file: ``CCTENSOR`` magic, then little-endian u32 version (1), u32
dtype tag (0 = f32), u32 rank, rank u64 dims, and the row-major f32
payload. Readable in ~20 lines in any language.

Mask file: ``CCEPMASK`` magic, u32 version (1), u32 h, u32 w, f64 ratio,
then h*w rows of ceil(2*h*w/8) bytes each, bits packed LSB-first, padding
bits zero.

Trajectory file (for the evaluation metrics):

    sample <id>
    pose <12 numbers as in frame lines>
    failed                # replaces pose lines when estimation failed

All writers are atomic (temp file + rename) and deterministic: floats are
rendered with shortest round-trip repr, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import contextlib
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .camera import CameraPose, Extrinsics, Intrinsics, Rig
from .epipolar import EpipolarMask
from .metrics import EstimatedTrajectory

TENSOR_MAGIC = b"CCTENSOR"
MASK_MAGIC = b"CCEPMASK"
FORMAT_VERSION = 1
DTYPE_F32 = 0

PathLike = Union[str, os.PathLike]


class PoseFileError(ValueError):
    """Parse failure with the 1-based line number it occurred on."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp.",
                               suffix="." + os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    # repr gives the shortest digits that round-trip, and is deterministic
    return repr(float(x))


def _parse_float(token: str, line_no: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise PoseFileError(line_no, f"bad {what}: {token!r} is not a number")
    if not math.isfinite(value):
        raise PoseFileError(line_no, f"bad {what}: {token!r} is not finite")
    return value


def _parse_int(token: str, line_no: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise PoseFileError(line_no, f"bad {what}: {token!r} is not an integer")


@dataclass(frozen=True)
class PoseFileContent:
    """Everything a pose file declares: cameras, frames, rig topology."""

    intrinsics: Mapping[str, Intrinsics]
    trajectories: Mapping[str, Tuple[CameraPose, ...]]
    rig: Optional[Rig]

    def __post_init__(self):
        object.__setattr__(self, "intrinsics",
                           MappingProxyType(dict(self.intrinsics)))
        object.__setattr__(
            self, "trajectories",
            MappingProxyType({k: tuple(v) for k, v in dict(self.trajectories).items()}))

    def trajectory(self, view: str) -> Tuple[CameraPose, ...]:
        if view not in self.trajectories:
            known = ", ".join(sorted(self.trajectories)) or "none"
            raise ValueError(f"unknown view {view!r} (known: {known})")
        return self.trajectories[view]


def _extrinsics_from_tokens(tokens: Sequence[str], line_no: int) -> Extrinsics:
    if len(tokens) != 12:
        raise PoseFileError(line_no,
                            f"expected 12 pose numbers, got {len(tokens)}")
    nums = [_parse_float(tok, line_no, "pose number") for tok in tokens]
    r = np.array(nums[:9]).reshape(3, 3)
    t = np.array(nums[9:])
    try:
        return Extrinsics(r=r, t=t)
    except ValueError as exc:
        raise PoseFileError(line_no, str(exc))


def parse_pose_file(text: str) -> PoseFileContent:
    intrinsics: dict[str, Intrinsics] = {}
    frames: dict[str, dict[int, Extrinsics]] = {}
    neighbor_lines: dict[str, tuple[Optional[str], Optional[str]]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind, args = tokens[0], tokens[1:]
        if kind == "view":
            if len(args) != 7:
                raise PoseFileError(line_no,
                                    f"view takes 7 fields, got {len(args)}")
            view = args[0]
            if view in intrinsics:
                raise PoseFileError(line_no, f"duplicate view {view!r}")
            width = _parse_int(args[1], line_no, "width")
            height = _parse_int(args[2], line_no, "height")
            fx, fy, cx, cy = (_parse_float(a, line_no, name) for a, name in
                              zip(args[3:], ("fx", "fy", "cx", "cy")))
            try:
                intrinsics[view] = Intrinsics.from_params(
                    fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height)
            except ValueError as exc:
                raise PoseFileError(line_no, str(exc))
            frames.setdefault(view, {})
        elif kind == "frame":
            if len(args) != 14:
                raise PoseFileError(line_no,
                                    f"frame takes 14 fields, got {len(args)}")
            view = args[0]
            if view not in intrinsics:
                raise PoseFileError(line_no,
                                    f"frame for undeclared view {view!r}")
            index = _parse_int(args[1], line_no, "frame index")
            if index < 0:
                raise PoseFileError(line_no, f"negative frame index {index}")
            if index in frames[view]:
                raise PoseFileError(
                    line_no, f"duplicate frame {index} for view {view!r}")
            frames[view][index] = _extrinsics_from_tokens(args[2:], line_no)
        elif kind == "neighbors":
            if len(args) != 3:
                raise PoseFileError(line_no,
                                    f"neighbors takes 3 fields, got {len(args)}")
            view = args[0]
            if view not in intrinsics:
                raise PoseFileError(line_no,
                                    f"neighbors for undeclared view {view!r}")
            if view in neighbor_lines:
                raise PoseFileError(line_no,
                                    f"duplicate neighbors for view {view!r}")
            left = None if args[1] == "-" else args[1]
            right = None if args[2] == "-" else args[2]
            neighbor_lines[view] = (left, right)
        else:
            raise PoseFileError(line_no, f"unknown directive {kind!r}")
    trajectories = {}
    for view, by_index in frames.items():
        trajectories[view] = tuple(
            CameraPose(intrinsics=intrinsics[view], extrinsics=by_index[index],
                       frame_index=index, view_id=view)
            for index in sorted(by_index))
    rig = None
    if neighbor_lines:
        try:
            rig = Rig(views=tuple(intrinsics), neighbor_map=neighbor_lines)
        except ValueError as exc:
            raise PoseFileError(0, f"rig topology invalid: {exc}")
    return PoseFileContent(intrinsics=intrinsics, trajectories=trajectories,
                           rig=rig)


def read_pose_file(path: PathLike) -> PoseFileContent:
    with open(path, "r", encoding="utf-8") as f:
        return parse_pose_file(f.read())


def render_pose_file(content: PoseFileContent) -> str:
    lines = []
    for view in content.intrinsics:
        if any(ch.isspace() for ch in view) or view == "-" or not view:
            raise ValueError(f"view id {view!r} not representable in pose file")
        intr = content.intrinsics[view]
        lines.append("view {} {} {} {} {} {} {}".format(
            view, intr.width, intr.height,
            _fmt(intr.fx), _fmt(intr.fy), _fmt(intr.cx), _fmt(intr.cy)))
    for view, poses in content.trajectories.items():
        for pose in poses:
            nums = [*pose.extrinsics.r.ravel(), *pose.extrinsics.t]
            lines.append("frame {} {} {}".format(
                view, pose.frame_index, " ".join(_fmt(x) for x in nums)))
    if content.rig is not None:
        for view in content.rig.views:
            left, right = content.rig.neighbors(view)
            lines.append("neighbors {} {} {}".format(
                view, left if left is not None else "-",
                right if right is not None else "-"))
    return "\n".join(lines) + "\n"


def write_pose_file(path: PathLike, content: PoseFileContent) -> None:
    atomic_write_bytes(path, render_pose_file(content).encode("utf-8"))


# -- binary tensor files ----------------------------------------------------

def write_tensor(path: PathLike, array: np.ndarray) -> None:
    """Serialize an array as little-endian f32; lossy above f32 precision."""
    # asarray keeps rank-0 inputs rank-0 (ascontiguousarray would not)
    array = np.asarray(array, dtype="<f4", order="C")
    header = TENSOR_MAGIC + struct.pack("<III", FORMAT_VERSION, DTYPE_F32,
                                        array.ndim)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    atomic_write_bytes(path, header + array.tobytes())


def read_tensor(path: PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != TENSOR_MAGIC:
        raise ValueError(f"{path}: not a tensor file (bad magic)")
    if len(data) < 20:
        raise ValueError(f"{path}: truncated tensor header")
    version, dtype_tag, rank = struct.unpack_from("<III", data, 8)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported tensor version {version}")
    if dtype_tag != DTYPE_F32:
        raise ValueError(f"{path}: unsupported dtype tag {dtype_tag}")
    offset = 20
    if len(data) < offset + 8 * rank:
        raise ValueError(f"{path}: truncated tensor dims")
    dims = struct.unpack_from(f"<{rank}Q", data, offset)
    offset += 8 * rank
    count = 1
    for d in dims:
        count *= d
    expected = offset + 4 * count
    if len(data) != expected:
        raise ValueError(f"{path}: payload length {len(data) - offset} does not "
                         f"match dims {dims} ({4 * count} bytes expected)")
    flat = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
    return flat.reshape(dims).astype(np.float32, copy=True)


# -- bit-packed mask files --------------------------------------------------

def write_mask(path: PathLike, mask: EpipolarMask) -> None:
    packed = np.packbits(mask.bits.astype(np.uint8), axis=1, bitorder="little")
    header = MASK_MAGIC + struct.pack("<III", FORMAT_VERSION, mask.h, mask.w)
    header += struct.pack("<d", mask.ratio)
    atomic_write_bytes(path, header + packed.tobytes())


def read_mask(path: PathLike) -> EpipolarMask:
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != MASK_MAGIC:
        raise ValueError(f"{path}: not a mask file (bad magic)")
    if len(data) < 28:
        raise ValueError(f"{path}: truncated mask header")
    version, h, w = struct.unpack_from("<III", data, 8)
    (ratio,) = struct.unpack_from("<d", data, 20)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported mask version {version}")
    if h < 1 or w < 1:
        raise ValueError(f"{path}: bad mask dimensions {h}x{w}")
    n_queries = h * w
    n_keys = 2 * n_queries
    row_bytes = (n_keys + 7) // 8
    expected = 28 + n_queries * row_bytes
    if len(data) != expected:
        raise ValueError(f"{path}: mask payload is {len(data) - 28} bytes, "
                         f"expected {n_queries * row_bytes}")
    packed = np.frombuffer(data, dtype=np.uint8, offset=28)
    packed = packed.reshape(n_queries, row_bytes)
    unpacked = np.unpackbits(packed, axis=1, bitorder="little")
    if unpacked[:, n_keys:].any():
        raise ValueError(f"{path}: nonzero padding bits")
    bits = unpacked[:, :n_keys].astype(bool)
    return EpipolarMask(bits=bits, h=h, w=w, ratio=ratio)


def render_mask_pgm(mask: EpipolarMask) -> bytes:
    """Binary portable graymap of the mask, white = attended key."""
    rows, cols = mask.bits.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    return header + np.where(mask.bits, 255, 0).astype(np.uint8).tobytes()


def write_mask_pgm(path: PathLike, mask: EpipolarMask) -> None:
    atomic_write_bytes(path, render_mask_pgm(mask))


# -- trajectory files for evaluation ----------------------------------------

def parse_trajectory_file(text: str) -> list[EstimatedTrajectory]:
    samples: list[EstimatedTrajectory] = []
    current_id: Optional[str] = None
    current_frames: list[Extrinsics] = []
    current_failed = False

    def flush(line_no: int):
        nonlocal current_id, current_frames, current_failed
        if current_id is None:
            return
        if current_failed:
            samples.append(EstimatedTrajectory.failed(current_id))
        elif current_frames:
            samples.append(EstimatedTrajectory(frames=tuple(current_frames),
                                               sample_id=current_id))
        else:
            raise PoseFileError(
                line_no, f"sample {current_id!r} has no pose lines and no "
                "failed marker")
        current_id, current_frames, current_failed = None, [], False

    last_line = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        last_line = line_no
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind, args = tokens[0], tokens[1:]
        if kind == "sample":
            if len(args) != 1:
                raise PoseFileError(line_no, "sample takes exactly one id")
            flush(line_no)
            current_id = args[0]
        elif kind == "pose":
            if current_id is None:
                raise PoseFileError(line_no, "pose before any sample line")
            if current_failed:
                raise PoseFileError(line_no,
                                    "pose after failed marker in same sample")
            current_frames.append(_extrinsics_from_tokens(args, line_no))
        elif kind == "failed":
            if current_id is None:
                raise PoseFileError(line_no, "failed before any sample line")
            if current_frames:
                raise PoseFileError(line_no,
                                    "failed marker after pose lines in same sample")
            if args:
                raise PoseFileError(line_no, "failed takes no arguments")
            current_failed = True
        else:
            raise PoseFileError(line_no, f"unknown directive {kind!r}")
    flush(last_line + 1)
    if not samples:
        raise PoseFileError(last_line + 1, "no samples in trajectory file")
    return samples


def read_trajectory_file(path: PathLike) -> list[EstimatedTrajectory]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_trajectory_file(f.read())


def render_trajectory_file(samples: Sequence[EstimatedTrajectory]) -> str:
    lines = []
    for sample in samples:
        if any(ch.isspace() for ch in sample.sample_id) or not sample.sample_id:
            raise ValueError(
                f"sample id {sample.sample_id!r} not representable")
        lines.append(f"sample {sample.sample_id}")
        if not sample.succeeded:
            lines.append("failed")
            continue
        for ext in sample.frames:
            nums = [*ext.r.ravel(), *ext.t]
            lines.append("pose " + " ".join(_fmt(x) for x in nums))
    return "\n".join(lines) + "\n"


def write_trajectory_file(path: PathLike,
                          samples: Sequence[EstimatedTrajectory]) -> None:
    atomic_write_bytes(path, render_trajectory_file(samples).encode("utf-8"))


def ground_truth_trajectories(samples: Sequence[EstimatedTrajectory],
                              ) -> list[list[Extrinsics]]:
    """Unwrap fully-present trajectories; ground truth may not have failures."""
    out = []
    for sample in samples:
        if not sample.succeeded:
            raise ValueError(
                f"ground truth sample {sample.sample_id!r} is marked failed")
        out.append([f for f in sample.frames])
    return out
