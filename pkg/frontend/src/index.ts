export { CamcondError, repoRoot, runCamcond } from "./cli.js";
export type { RunResult } from "./cli.js";
export { readMask, readTensor, writeMask, writeTensor } from "./formats.js";
export type { Mask, Tensor } from "./formats.js";
export {
  formatNumber,
  parsePoseFile,
  parseTrajectoryFile,
  renderPoseFile,
  renderTrajectoryFile,
} from "./poses.js";
export type {
  Pose,
  PoseFileData,
  TrajectorySample,
  ViewSpec,
} from "./poses.js";
export {
  bindEval,
  bindFundamental,
  bindMask,
  bindPlucker,
} from "./bindings.js";
export type { EvalReport, MaskOptions } from "./bindings.js";
