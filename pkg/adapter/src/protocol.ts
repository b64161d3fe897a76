/**
 * Job-directory wire protocol.
 *
 * The caller materializes a directory with config.json plus the job's
 * input files and invokes this endpoint with the directory path. Training
 * jobs read train.src/train.tgt/dev.src/dev.tgt and write `checkpoint`
 * and `dev_scores.json`; prediction jobs read pred.src and write
 * pred.tgt. Exit code 0 means success; protocol problems exit 2.
 */

import * as fs from "fs";
import * as path from "path";

export class ProtocolError extends Error {}

export interface TrainConfig {
  job: "train";
  learning_rate: number;
  epochs: number;
  lr_decay: number;
  seed: number;
  beam: number;
  batch: number;
  dropout: number;
  init_checkpoint: string | null;
}

export interface PredictConfig {
  job: "predict";
  beam: number;
  init_checkpoint: string | null;
}

export type JobConfig = TrainConfig | PredictConfig;

function requireNumber(raw: Record<string, unknown>, field: string, fallback?: number): number {
  const value = raw[field];
  if (value === undefined && fallback !== undefined) {
    return fallback;
  }
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new ProtocolError(`config field ${field} must be a number`);
  }
  return value;
}

export function readConfig(jobDir: string): JobConfig {
  const configPath = path.join(jobDir, "config.json");
  if (!fs.existsSync(configPath)) {
    throw new ProtocolError(`missing ${configPath}`);
  }
  let raw: Record<string, unknown>;
  try {
    raw = JSON.parse(fs.readFileSync(configPath, "utf-8"));
  } catch (err) {
    throw new ProtocolError(`config.json is not valid JSON: ${String(err)}`);
  }
  const job = raw["job"];
  const checkpoint = raw["init_checkpoint"];
  const initCheckpoint = typeof checkpoint === "string" ? checkpoint : null;
  if (job === "predict") {
    return {
      job: "predict",
      beam: requireNumber(raw, "beam", 5),
      init_checkpoint: initCheckpoint,
    };
  }
  if (job === "train") {
    return {
      job: "train",
      learning_rate: requireNumber(raw, "learning_rate"),
      epochs: requireNumber(raw, "epochs"),
      lr_decay: requireNumber(raw, "lr_decay", 0.8),
      seed: requireNumber(raw, "seed", 0),
      beam: requireNumber(raw, "beam", 5),
      batch: requireNumber(raw, "batch", 100),
      dropout: requireNumber(raw, "dropout", 0.5),
      init_checkpoint: initCheckpoint,
    };
  }
  throw new ProtocolError(`config.json field "job" must be "train" or "predict"`);
}

export function readLines(jobDir: string, name: string): string[] {
  const filePath = path.join(jobDir, name);
  if (!fs.existsSync(filePath)) {
    throw new ProtocolError(`missing ${filePath}`);
  }
  const text = fs.readFileSync(filePath, "utf-8");
  const lines = text.split("\n");
  if (lines.length > 0 && lines[lines.length - 1] === "") {
    lines.pop();
  }
  return lines;
}

export function readPairs(jobDir: string, srcName: string, tgtName: string): Array<[string, string]> {
  const src = readLines(jobDir, srcName);
  const tgt = readLines(jobDir, tgtName);
  if (src.length !== tgt.length) {
    throw new ProtocolError(
      `${srcName} has ${src.length} lines but ${tgtName} has ${tgt.length}`
    );
  }
  return src.map((s, i) => [s, tgt[i]]);
}

export function writeLines(jobDir: string, name: string, lines: string[]): void {
  fs.writeFileSync(path.join(jobDir, name), lines.map((l) => l + "\n").join(""), "utf-8");
}
