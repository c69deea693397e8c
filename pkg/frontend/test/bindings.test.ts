import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import {
  bindEval,
  bindFundamental,
  bindMask,
  bindPlucker,
} from "../src/bindings.js";
import { CamcondError, repoRoot, runCamcond } from "../src/cli.js";
import { readMask, readTensor } from "../src/formats.js";
import { parsePoseFile, parseTrajectoryFile } from "../src/poses.js";

const scratch = mkdtempSync(join(tmpdir(), "camcond-bind-"));
afterAll(() => rmSync(scratch, { recursive: true, force: true }));

function fixturePath(name: string): string {
  return join(repoRoot(), "fixtures", name);
}

function fixtureText(name: string): string {
  return readFileSync(fixturePath(name), "utf-8");
}

function f32Bytes(data: Float32Array): Buffer {
  return Buffer.from(data.buffer, data.byteOffset, 4 * data.length);
}

describe("binding equivalence", () => {
  it("criterion 9: binding outputs equal CLI file outputs for the rig fixture", () => {
    try {
      const rig = parsePoseFile(fixtureText("ring6.poses"));

      const bound = bindPlucker(rig, "cam0", 16, 16);
      const tensorOut = join(scratch, "cli_rays.tensor");
      runCamcond([
        "plucker", fixturePath("ring6.poses"),
        "--view", "cam0", "--height", "16", "--width", "16",
        "--out", tensorOut,
      ]);
      const direct = readTensor(readFileSync(tensorOut));
      expect(bound.shape).toEqual([3, 6, 16, 16]);
      expect(bound.shape).toEqual(direct.shape);
      expect(f32Bytes(bound.data)).toEqual(f32Bytes(direct.data));

      const boundF = bindFundamental(rig, "cam0", "cam1");
      const fOut = join(scratch, "cli_f.tensor");
      runCamcond([
        "fundamental", fixturePath("ring6.poses"),
        "--view", "cam0", "--neighbor", "cam1", "--out", fOut,
      ]);
      const directF = readTensor(readFileSync(fOut));
      expect(boundF.shape).toEqual([3, 3]);
      expect(f32Bytes(boundF.data)).toEqual(f32Bytes(directF.data));

      const boundMask = bindMask(rig, "cam0", 16, 16);
      const maskOut = join(scratch, "cli_bits.mask");
      runCamcond([
        "mask", fixturePath("ring6.poses"),
        "--view", "cam0", "--height", "16", "--width", "16",
        "--out", maskOut,
      ]);
      const directMask = readMask(readFileSync(maskOut));
      expect(boundMask.h).toBe(directMask.h);
      expect(boundMask.w).toBe(directMask.w);
      expect(boundMask.ratio).toBe(directMask.ratio);
      expect(Buffer.from(boundMask.bits)).toEqual(
        Buffer.from(directMask.bits),
      );
    } catch (err) {
      console.log("criterion 9 (binding equivalence): FAIL");
      throw err;
    }
    console.log("criterion 9 (binding equivalence): PASS");
  });

  it("mask rows carry exactly the budgeted number of keys", () => {
    const rig = parsePoseFile(fixtureText("ring6.poses"));
    const mask = bindMask(rig, "cam1", 8, 8);
    const nKeys = 2 * mask.h * mask.w;
    const budget = Math.floor(0.25 * nKeys);
    for (let row = 0; row < mask.h * mask.w; row++) {
      let count = 0;
      for (let k = 0; k < nKeys; k++) count += mask.bits[row * nKeys + k];
      expect(count).toBe(budget);
    }
  });

  it("ratio 1.0 keeps every key", () => {
    const rig = parsePoseFile(fixtureText("stereo3.poses"));
    const mask = bindMask(rig, "center", 4, 4, { ratio: 1.0 });
    expect(mask.ratio).toBe(1.0);
    expect(mask.bits.every((b) => b === 1)).toBe(true);
  });

  it("normalization flag reaches the CLI", () => {
    const poses = parsePoseFile(fixtureText("forward14.poses"));
    const anchored = bindPlucker(poses, "cam0", 6, 9, true);
    const raw = bindPlucker(poses, "cam0", 6, 9, false);
    expect(anchored.shape).toEqual(raw.shape);
    expect(f32Bytes(anchored.data).equals(f32Bytes(raw.data))).toBe(false);
  });

  it("eval binding reproduces the CLI report", () => {
    const gen = parseTrajectoryFile(fixtureText("eval_gen_rot5.traj"));
    const gt = parseTrajectoryFile(fixtureText("eval_gt.traj"));
    const report = bindEval(gen, gt);

    const jsonOut = join(scratch, "report.json");
    runCamcond([
      "eval",
      "--gen", fixturePath("eval_gen_rot5.traj"),
      "--gt", fixturePath("eval_gt.traj"),
      "--json", jsonOut,
    ]);
    const doc = JSON.parse(readFileSync(jsonOut, "utf-8"));
    expect(report.rotErr).toBe(doc.rot_err);
    expect(report.transErr).toBe(doc.trans_err);
    expect(report.successRate).toBe(doc.success_rate);
    expect(report.nSamples).toBe(doc.n_samples);
    expect(report.nSuccess).toBe(doc.n_success);
    expect(report.warnings).toEqual(doc.warnings);
  });

  it("maps undefined errors to null when every sample fails", () => {
    const gt = parseTrajectoryFile(fixtureText("eval_gt.traj"));
    const gen = gt.map((s) => ({
      sampleId: s.sampleId,
      frames: [],
      failed: true,
    }));
    const report = bindEval(gen, gt);
    expect(report.successRate).toBe(0);
    expect(report.rotErr).toBeNull();
    expect(report.transErr).toBeNull();
  });

  it("carries the core validation message on bad input", () => {
    const rig = parsePoseFile(fixtureText("ring6.poses"));
    rig.frames.get("cam0")!.get(0)!.r[1] = 0.5;
    let thrown: unknown;
    try {
      bindPlucker(rig, "cam0", 4, 4);
    } catch (err) {
      thrown = err;
    }
    expect(thrown).toBeInstanceOf(CamcondError);
    const error = thrown as CamcondError;
    expect(error.exitCode).toBe(2);
    expect(error.message).toContain("not orthonormal");
  });
});
