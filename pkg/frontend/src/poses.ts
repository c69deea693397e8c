/**
 * Text codecs for the line-oriented pose and trajectory files the CLI
 * consumes. `#` starts a comment, blank lines are skipped.
 *
 * Pose files:
 *   view {id} {width} {height} {fx} {fy} {cx} {cy}
 *   frame {id} {index} {r00 r01 r02 r10 .. r22} {tx ty tz}
 *   neighbors {id} {left|-} {right|-}
 *
 * Trajectory files:
 *   sample {id}
 *   pose {12 numbers as above}   (or a single `failed` line)
 */

export interface ViewSpec {
  width: number;
  height: number;
  fx: number;
  fy: number;
  cx: number;
  cy: number;
}

export interface Pose {
  /** Row-major 3x3 rotation, world-to-camera. */
  r: number[];
  /** Translation, world-to-camera (x_cam = R x_world + t). */
  t: number[];
}

export interface PoseFileData {
  views: Map<string, ViewSpec>;
  /** view id -> frame index -> extrinsics */
  frames: Map<string, Map<number, Pose>>;
  neighbors: Map<string, [string | null, string | null]>;
}

export interface TrajectorySample {
  sampleId: string;
  frames: Pose[];
  failed: boolean;
}

/**
 * Shortest round-trip decimal, matching the Python renderer closely
 * enough that re-rendered fixtures stay byte-identical: integral values
 * keep a trailing ".0" and negative zero keeps its sign.
 */
export function formatNumber(x: number): string {
  if (Object.is(x, -0)) return "-0.0";
  const s = String(x);
  if (Number.isInteger(x) && !/[.e]/.test(s)) return s + ".0";
  return s;
}

function fail(lineNo: number, message: string): never {
  throw new Error(`line ${lineNo}: ${message}`);
}

function parseNumber(token: string, lineNo: number, what: string): number {
  const value = Number(token);
  if (token === "" || Number.isNaN(value)) {
    fail(lineNo, `bad ${what}: '${token}' is not a number`);
  }
  if (!Number.isFinite(value)) {
    fail(lineNo, `bad ${what}: '${token}' is not finite`);
  }
  return value;
}

function poseFromTokens(tokens: string[], lineNo: number): Pose {
  if (tokens.length !== 12) {
    fail(lineNo, `expected 12 pose numbers, got ${tokens.length}`);
  }
  const nums = tokens.map((tok) => parseNumber(tok, lineNo, "pose number"));
  return { r: nums.slice(0, 9), t: nums.slice(9) };
}

function* contentLines(text: string): Generator<[number, string[]]> {
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const stripped = lines[i].split("#", 1)[0].trim();
    if (stripped.length === 0) continue;
    yield [i + 1, stripped.split(/\s+/)];
  }
}

export function parsePoseFile(text: string): PoseFileData {
  const views = new Map<string, ViewSpec>();
  const frames = new Map<string, Map<number, Pose>>();
  const neighbors = new Map<string, [string | null, string | null]>();
  for (const [lineNo, tokens] of contentLines(text)) {
    const [kind, ...args] = tokens;
    if (kind === "view") {
      if (args.length !== 7) {
        fail(lineNo, `view takes 7 fields, got ${args.length}`);
      }
      const view = args[0];
      if (views.has(view)) fail(lineNo, `duplicate view '${view}'`);
      views.set(view, {
        width: parseNumber(args[1], lineNo, "width"),
        height: parseNumber(args[2], lineNo, "height"),
        fx: parseNumber(args[3], lineNo, "fx"),
        fy: parseNumber(args[4], lineNo, "fy"),
        cx: parseNumber(args[5], lineNo, "cx"),
        cy: parseNumber(args[6], lineNo, "cy"),
      });
      frames.set(view, new Map());
    } else if (kind === "frame") {
      if (args.length !== 14) {
        fail(lineNo, `frame takes 14 fields, got ${args.length}`);
      }
      const view = args[0];
      const byIndex = frames.get(view);
      if (byIndex === undefined) {
        fail(lineNo, `frame for undeclared view '${view}'`);
      }
      const index = parseNumber(args[1], lineNo, "frame index");
      if (!Number.isInteger(index) || index < 0) {
        fail(lineNo, `bad frame index ${args[1]}`);
      }
      if (byIndex.has(index)) {
        fail(lineNo, `duplicate frame ${index} for view '${view}'`);
      }
      byIndex.set(index, poseFromTokens(args.slice(2), lineNo));
    } else if (kind === "neighbors") {
      if (args.length !== 3) {
        fail(lineNo, `neighbors takes 3 fields, got ${args.length}`);
      }
      const view = args[0];
      if (!views.has(view)) {
        fail(lineNo, `neighbors for undeclared view '${view}'`);
      }
      if (neighbors.has(view)) {
        fail(lineNo, `duplicate neighbors for view '${view}'`);
      }
      neighbors.set(view, [
        args[1] === "-" ? null : args[1],
        args[2] === "-" ? null : args[2],
      ]);
    } else {
      fail(lineNo, `unknown directive '${kind}'`);
    }
  }
  return { views, frames, neighbors };
}

export function renderPoseFile(data: PoseFileData): string {
  const lines: string[] = [];
  for (const [view, spec] of data.views) {
    lines.push(
      `view ${view} ${spec.width} ${spec.height} ` +
        [spec.fx, spec.fy, spec.cx, spec.cy].map(formatNumber).join(" "),
    );
  }
  for (const [view, byIndex] of data.frames) {
    for (const index of [...byIndex.keys()].sort((a, b) => a - b)) {
      const pose = byIndex.get(index)!;
      const nums = [...pose.r, ...pose.t].map(formatNumber).join(" ");
      lines.push(`frame ${view} ${index} ${nums}`);
    }
  }
  for (const [view, [left, right]] of data.neighbors) {
    lines.push(`neighbors ${view} ${left ?? "-"} ${right ?? "-"}`);
  }
  return lines.join("\n") + "\n";
}

export function parseTrajectoryFile(text: string): TrajectorySample[] {
  const samples: TrajectorySample[] = [];
  let current: TrajectorySample | null = null;
  for (const [lineNo, tokens] of contentLines(text)) {
    const [kind, ...args] = tokens;
    if (kind === "sample") {
      if (args.length !== 1) fail(lineNo, "sample takes exactly one id");
      current = { sampleId: args[0], frames: [], failed: false };
      samples.push(current);
    } else if (kind === "pose") {
      if (current === null) fail(lineNo, "pose before any sample line");
      if (current.failed) {
        fail(lineNo, "pose after failed marker in same sample");
      }
      current.frames.push(poseFromTokens(args, lineNo));
    } else if (kind === "failed") {
      if (current === null) fail(lineNo, "failed before any sample line");
      if (args.length !== 0) fail(lineNo, "failed takes no arguments");
      if (current.frames.length > 0) {
        fail(lineNo, "failed marker after pose lines in same sample");
      }
      current.failed = true;
    } else {
      fail(lineNo, `unknown directive '${kind}'`);
    }
  }
  for (const sample of samples) {
    if (!sample.failed && sample.frames.length === 0) {
      throw new Error(
        `sample '${sample.sampleId}' has no pose lines and no failed marker`,
      );
    }
  }
  if (samples.length === 0) {
    throw new Error("no samples in trajectory file");
  }
  return samples;
}

export function renderTrajectoryFile(samples: TrajectorySample[]): string {
  const lines: string[] = [];
  for (const sample of samples) {
    lines.push(`sample ${sample.sampleId}`);
    if (sample.failed) {
      lines.push("failed");
      continue;
    }
    for (const pose of sample.frames) {
      lines.push(
        `pose ${[...pose.r, ...pose.t].map(formatNumber).join(" ")}`,
      );
    }
  }
  return lines.join("\n") + "\n";
}
