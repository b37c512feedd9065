/**
 * Typed-array frontend for the ordseg CLI.
 *
 * All computation is delegated to the Python CLI through its documented file
 * formats (OPM1, PGM, order files), so results are bit-identical to running
 * the CLI directly.  Set ORDSEG_CLI to override the command used, e.g.
 * ORDSEG_CLI="python3 -m ordseg".
 */

import { spawnSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import {
  DenseMap,
  KIND_LOGITS,
  KIND_PROBS,
  LabelMask,
  checkDenseMap,
  checkLabelMask,
  decodeOpm1,
  encodeOpm1,
  encodePgm,
} from "./formats";

export * from "./formats";

export const VERSION = "0.1.0";

export interface LossConfig {
  lambdaO2?: number;
  lambdaCsnp?: number;
  lambdaCsdt?: number;
  deltaMargin?: number;
  deltaDt?: number;
  gamma?: number;
  dtMetric?: "euclidean" | "chessboard" | "manhattan";
}

export interface LossResult {
  value: number;
  gradient: Float64Array;
  terms: { ce: number; o2: number; csnp: number; csdt: number };
}

export interface MetricsResult {
  diceMacro: number;
  dicePerClass: (number | null)[];
  cs: number;
  up: number;
}

export class CliError extends Error {}

function cliCommand(): string[] {
  const override = process.env.ORDSEG_CLI;
  if (override && override.trim().length > 0) {
    return override.trim().split(/\s+/);
  }
  return ["python3", "-m", "ordseg"];
}

function runCli(args: string[]): string {
  const [cmd, ...base] = cliCommand();
  const proc = spawnSync(cmd, [...base, ...args], { encoding: "utf-8" });
  if (proc.error) {
    throw new CliError(`failed to launch ordseg CLI: ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    throw new CliError(
      `ordseg CLI exited with code ${proc.status}: ${proc.stderr.trim()}`
    );
  }
  return proc.stdout;
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "ordseg-"));
  try {
    return fn(dir);
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

/** "chain:K" passes through; order-file text is written to a temp file. */
function resolveOrderSpec(spec: string, dir: string): string {
  if (/^chain:\d+$/.test(spec.trim())) {
    return spec.trim();
  }
  const orderPath = path.join(dir, "order.txt");
  fs.writeFileSync(orderPath, spec.endsWith("\n") ? spec : spec + "\n");
  return orderPath;
}

/**
 * Combined ordinal loss on a logit map; value, gradient, and per-term
 * breakdown match the CLI `loss` subcommand exactly.
 */
export function loss(
  logits: DenseMap,
  target: LabelMask,
  orderSpec: string,
  config: LossConfig = {}
): LossResult {
  checkDenseMap(logits);
  checkLabelMask(target);
  if (target.h !== logits.h || target.w !== logits.w) {
    throw new CliError(
      `target mask ${target.h}x${target.w} does not match logits ${logits.h}x${logits.w}`
    );
  }
  return withTempDir((dir) => {
    const logitsPath = path.join(dir, "z.opm1");
    const targetPath = path.join(dir, "y.pgm");
    const gradPath = path.join(dir, "grad.opm1");
    fs.writeFileSync(logitsPath, encodeOpm1(logits, KIND_LOGITS));
    fs.writeFileSync(targetPath, encodePgm(target));
    const args = [
      "loss",
      "--logits", logitsPath,
      "--target", targetPath,
      "--order", resolveOrderSpec(orderSpec, dir),
      "--grad-out", gradPath,
      "--lambda-o2", String(config.lambdaO2 ?? 0),
      "--lambda-csnp", String(config.lambdaCsnp ?? 0),
      "--lambda-csdt", String(config.lambdaCsdt ?? 0),
      "--delta-margin", String(config.deltaMargin ?? 0.05),
      "--delta-dt", String(config.deltaDt ?? 0.5),
      "--gamma", String(config.gamma ?? 10),
      "--dt-metric", config.dtMetric ?? "euclidean",
    ];
    const payload = JSON.parse(runCli(args));
    const { map } = decodeOpm1(fs.readFileSync(gradPath));
    return { value: payload.value, gradient: map.data, terms: payload.terms };
  });
}

/**
 * Dice / contact-surface / unimodal-pixel metrics for one prediction.
 *
 * When `probs` is given it is evaluated as the prediction (argmax mask plus
 * true unimodality); otherwise the hard `pred` mask is used.  Values are
 * parsed from the CLI `evaluate` CSV, so they are bit-identical to it.
 */
export function metrics(
  pred: LabelMask,
  target: LabelMask,
  probs: DenseMap | null,
  orderSpec: string
): MetricsResult {
  checkLabelMask(pred);
  checkLabelMask(target);
  if (probs !== null) {
    checkDenseMap(probs);
  }
  if (pred.h !== target.h || pred.w !== target.w) {
    throw new CliError(
      `pred ${pred.h}x${pred.w} does not match target ${target.h}x${target.w}`
    );
  }
  return withTempDir((dir) => {
    const predDir = path.join(dir, "pred");
    const targetDir = path.join(dir, "target");
    fs.mkdirSync(predDir);
    fs.mkdirSync(targetDir);
    if (probs !== null) {
      fs.writeFileSync(path.join(predDir, "x.opm1"), encodeOpm1(probs, KIND_PROBS));
    } else {
      fs.writeFileSync(path.join(predDir, "x.pgm"), encodePgm(pred));
    }
    fs.writeFileSync(path.join(targetDir, "x.pgm"), encodePgm(target));
    const csvPath = path.join(dir, "rows.csv");
    runCli([
      "evaluate",
      "--pred-dir", predDir,
      "--target-dir", targetDir,
      "--order", resolveOrderSpec(orderSpec, dir),
      "--out-csv", csvPath,
      "--out-json", path.join(dir, "summary.json"),
    ]);
    const lines = fs.readFileSync(csvPath, "utf-8").trim().split("\n");
    const cells = lines[1].split(",");
    const dicePerClass = cells
      .slice(2, cells.length - 2)
      .map((cell) => (cell === "" ? null : Number(cell)));
    return {
      diceMacro: Number(cells[1]),
      dicePerClass,
      cs: Number(cells[cells.length - 2]),
      up: Number(cells[cells.length - 1]),
    };
  });
}
