/**
 * Typed wrappers around the camcond CLI. Every binding writes its inputs
 * to a scratch directory, invokes one subcommand, and decodes the files
 * the CLI wrote; no geometry is reimplemented on this side, so binding
 * results are element-wise identical to what the CLI produces.
 */

import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { runCamcond } from "./cli.js";
import { Mask, Tensor, readMask, readTensor } from "./formats.js";
import {
  PoseFileData,
  TrajectorySample,
  renderPoseFile,
  renderTrajectoryFile,
} from "./poses.js";

export interface EvalReport {
  nSamples: number;
  nSuccess: number;
  successRate: number;
  /** null when every sample failed. */
  rotErr: number | null;
  transErr: number | null;
  warnings: string[];
}

function withTempDir<T>(body: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "camcond-"));
  try {
    return body(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/** Per-pixel ray embedding of one view's trajectory, shape (frames, 6, h, w). */
export function bindPlucker(
  poses: PoseFileData,
  view: string,
  h: number,
  w: number,
  normalize = true,
): Tensor {
  return withTempDir((dir) => {
    const poseFile = join(dir, "poses.txt");
    const out = join(dir, "rays.tensor");
    writeFileSync(poseFile, renderPoseFile(poses));
    runCamcond([
      "plucker", poseFile,
      "--view", view,
      "--height", String(h),
      "--width", String(w),
      "--out", out,
      normalize ? "--normalize-first-frame" : "--no-normalize-first-frame",
    ]);
    return readTensor(readFileSync(out));
  });
}

/** 3x3 fundamental matrix mapping neighbor pixels to the view's epipolar lines. */
export function bindFundamental(
  poses: PoseFileData,
  view: string,
  neighbor: string,
  frame = 0,
): Tensor {
  return withTempDir((dir) => {
    const poseFile = join(dir, "poses.txt");
    const out = join(dir, "f.tensor");
    writeFileSync(poseFile, renderPoseFile(poses));
    runCamcond([
      "fundamental", poseFile,
      "--view", view,
      "--neighbor", neighbor,
      "--frame", String(frame),
      "--out", out,
    ]);
    return readTensor(readFileSync(out));
  });
}

export interface MaskOptions {
  ratio?: number;
  tauMode?: "per-row" | "global";
  frame?: number;
}

/** Epipolar attention mask for a view against its two rig neighbors. */
export function bindMask(
  poses: PoseFileData,
  view: string,
  h: number,
  w: number,
  options: MaskOptions = {},
): Mask {
  return withTempDir((dir) => {
    const poseFile = join(dir, "poses.txt");
    const out = join(dir, "bits.mask");
    writeFileSync(poseFile, renderPoseFile(poses));
    const args = [
      "mask", poseFile,
      "--view", view,
      "--height", String(h),
      "--width", String(w),
      "--out", out,
    ];
    if (options.ratio !== undefined) {
      args.push("--ratio", String(options.ratio));
    }
    if (options.tauMode !== undefined) {
      args.push("--tau-mode", options.tauMode);
    }
    if (options.frame !== undefined) {
      args.push("--frame", String(options.frame));
    }
    runCamcond(args);
    return readMask(readFileSync(out));
  });
}

/** Success-rate-weighted trajectory errors of generated vs ground truth. */
export function bindEval(
  gen: TrajectorySample[],
  gt: TrajectorySample[],
): EvalReport {
  return withTempDir((dir) => {
    const genFile = join(dir, "gen.traj");
    const gtFile = join(dir, "gt.traj");
    const out = join(dir, "report.json");
    writeFileSync(genFile, renderTrajectoryFile(gen));
    writeFileSync(gtFile, renderTrajectoryFile(gt));
    runCamcond(["eval", "--gen", genFile, "--gt", gtFile, "--json", out]);
    const doc = JSON.parse(readFileSync(out, "utf-8"));
    return {
      nSamples: doc.n_samples,
      nSuccess: doc.n_success,
      successRate: doc.success_rate,
      rotErr: doc.rot_err,
      transErr: doc.trans_err,
      warnings: doc.warnings,
    };
  });
}
