import { spawnSync } from "node:child_process";
import { delimiter, dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

/** Nonzero exit from the camcond CLI, message taken from its stderr. */
export class CamcondError extends Error {
  readonly exitCode: number;
  readonly stderr: string;

  constructor(exitCode: number, stderr: string) {
    const marker = stderr
      .split("\n")
      .filter((line) => line.startsWith("error: "))
      .pop();
    super(marker ?? stderr.trim() ?? `camcond exited with code ${exitCode}`);
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

/** Repository root; the Python package lives in `<root>/src/camcond`. */
export function repoRoot(): string {
  if (process.env.CAMCOND_ROOT) return process.env.CAMCOND_ROOT;
  // compiled layout frontend/dist/cli.js and source layout frontend/src/cli.ts
  // are both two levels below the repository root
  return resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");
}

export interface RunResult {
  status: number;
  stdout: string;
  stderr: string;
}

/**
 * Run one camcond subcommand and capture its output. Throws CamcondError
 * on nonzero exit so callers see the CLI's own validation message.
 */
export function runCamcond(args: string[]): RunResult {
  const python = process.env.CAMCOND_PYTHON ?? "python3";
  const pythonPath = [join(repoRoot(), "src"), process.env.PYTHONPATH]
    .filter(Boolean)
    .join(delimiter);
  const proc = spawnSync(python, ["-m", "camcond", ...args], {
    encoding: "utf-8",
    env: { ...process.env, PYTHONPATH: pythonPath },
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) throw proc.error;
  if (proc.status !== 0) {
    throw new CamcondError(proc.status ?? -1, proc.stderr);
  }
  return { status: proc.status, stdout: proc.stdout, stderr: proc.stderr };
}
