import * as fs from "fs";
import * as path from "path";

import {
  deserializeState,
  emptyState,
  exactMatch,
  predictLine,
  serializeState,
  trainEpoch,
  ModelState,
} from "./model";
import {
  JobConfig,
  ProtocolError,
  readConfig,
  readLines,
  readPairs,
  writeLines,
} from "./protocol";

function loadInitial(config: JobConfig): ModelState {
  if (config.init_checkpoint === null) {
    const seed = config.job === "train" ? config.seed : 0;
    return emptyState(seed);
  }
  if (!fs.existsSync(config.init_checkpoint)) {
    throw new ProtocolError(`init_checkpoint does not exist: ${config.init_checkpoint}`);
  }
  return deserializeState(fs.readFileSync(config.init_checkpoint, "utf-8"));
}

function runTrain(jobDir: string, config: JobConfig & { job: "train" }): void {
  const trainPairs = readPairs(jobDir, "train.src", "train.tgt");
  const devPairs = readPairs(jobDir, "dev.src", "dev.tgt");
  const state = loadInitial(config);
  const devScores: number[] = [];
  for (let epoch = 0; epoch < config.epochs; epoch += 1) {
    trainEpoch(state, trainPairs);
    devScores.push(exactMatch(state, devPairs, config.beam));
  }
  fs.writeFileSync(path.join(jobDir, "checkpoint"), serializeState(state), "utf-8");
  fs.writeFileSync(path.join(jobDir, "dev_scores.json"), JSON.stringify(devScores) + "\n", "utf-8");
}

function runPredict(jobDir: string, config: JobConfig & { job: "predict" }): void {
  if (config.init_checkpoint === null) {
    throw new ProtocolError("prediction jobs require an init_checkpoint");
  }
  const inputs = readLines(jobDir, "pred.src");
  const state = loadInitial(config);
  writeLines(jobDir, "pred.tgt", inputs.map((line) => predictLine(state, line, config.beam)));
}

/** Run one job; returns the process exit code (0 ok, 2 protocol error). */
export function serve(jobDir: string): number {
  try {
    if (!fs.existsSync(jobDir) || !fs.statSync(jobDir).isDirectory()) {
      throw new ProtocolError(`job directory does not exist: ${jobDir}`);
    }
    const config = readConfig(jobDir);
    if (config.job === "train") {
      runTrain(jobDir, config);
    } else {
      runPredict(jobDir, config);
    }
    return 0;
  } catch (err) {
    if (err instanceof ProtocolError) {
      process.stderr.write(`protocol error: ${err.message}\n`);
      return 2;
    }
    process.stderr.write(`error: ${String(err)}\n`);
    return 1;
  }
}
