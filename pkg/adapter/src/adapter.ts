/**
 * The polling loop: consume curriculum manifests, train the local classifier
 * on exactly the listed samples, score the full dataset, and publish loss
 * reports until the scheduler marks the run complete.
 *
 * Restart-safe by replay: training is deterministic in (seed, stage, cycle),
 * so a restarted adapter retrains through the manifests already on disk and
 * only writes the reports that are missing.
 */

import { existsSync, readFileSync } from "node:fs";
import { join } from "node:path";

import { ZodError } from "zod";

import {
  DATASET_FILE,
  DONE_MARKER,
  ProtocolError,
  RUN_CONFIG_FILE,
  atomicWrite,
  canonicalJson,
  checksum64,
  manifestPath,
  reportPath,
  sealRecord,
  sleep,
  verifySealedRecord,
} from "./protocol.js";
import {
  DatasetView,
  LinearModel,
  accuracy,
  buildDataset,
  sampleLoss,
  trainCycle,
} from "./model.js";
import {
  Manifest,
  ManifestSchema,
  RunConfig,
  RunConfigSchema,
  SampleSchema,
} from "./schemas.js";

export interface ServeOptions {
  pollMs: number;
  timeoutMs: number;
}

export class AdapterError extends Error {}

function diagnostic(runDir: string, file: string, error: unknown): void {
  atomicWrite(
    join(runDir, "adapter_error.json"),
    JSON.stringify({ file, error: String(error), at: new Date().toISOString() }) + "\n",
  );
}

/** Read and verify a sealed record, allowing one grace re-read for staleness. */
async function readSealed(path: string, pollMs: number): Promise<Record<string, unknown>> {
  try {
    return verifySealedRecord(readFileSync(path, "utf8"), path);
  } catch (err) {
    if (!(err instanceof ProtocolError)) throw err;
    await sleep(pollMs);
    return verifySealedRecord(readFileSync(path, "utf8"), path);
  }
}

function loadDataset(runDir: string): DatasetView {
  const text = readFileSync(join(runDir, DATASET_FILE), "utf8");
  const records = text
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line, i) => {
      try {
        return SampleSchema.parse(JSON.parse(line));
      } catch (err) {
        throw new AdapterError(`${DATASET_FILE} line ${i + 1}: ${err}`);
      }
    });
  if (records.length === 0) throw new AdapterError(`${DATASET_FILE} is empty`);
  return buildDataset(records);
}

function writeReport(
  runDir: string,
  model: LinearModel,
  data: DatasetView,
  stage: number,
  cycle: number,
): void {
  const lines = new Array<string>(data.n);
  for (let i = 0; i < data.n; i++) {
    const loss = sampleLoss(model, data, i);
    if (!Number.isFinite(loss) || loss < 0) {
      throw new AdapterError(`non-finite loss at row ${i}, stage ${stage} cycle ${cycle}`);
    }
    lines[i] = `{"id":${data.ids[i]},"loss":${JSON.stringify(loss)},"task":${data.tasks[i]}}`;
  }
  const body = lines.join("\n");
  const header = sealRecord({
    schema_version: 1,
    iteration: stage,
    cycle,
    n: data.n,
    checksum_body: checksum64(body),
  });
  atomicWrite(reportPath(runDir, stage, cycle), canonicalJson(header) + "\n" + body + "\n");
}

function writeFinalMetrics(runDir: string, model: LinearModel): void {
  const final: Record<string, { overall: number }> = {};
  for (const split of ["id", "ood"]) {
    const path = join(runDir, `test_${split}.jsonl`);
    if (!existsSync(path)) continue;
    const text = readFileSync(path, "utf8");
    const records = text
      .split("\n")
      .filter((l) => l.trim().length > 0)
      .map((l) => SampleSchema.parse(JSON.parse(l)));
    final[split] = { overall: accuracy(model, buildDataset(records)) };
  }
  atomicWrite(
    join(runDir, "trainer_metrics.json"),
    canonicalJson({ schema_version: 1, final }) + "\n",
  );
}

export async function serve(runDir: string, opts: ServeOptions): Promise<number> {
  const deadline = Date.now() + opts.timeoutMs;
  const configPath = join(runDir, RUN_CONFIG_FILE);
  while (!existsSync(configPath)) {
    if (Date.now() > deadline) throw new AdapterError(`timed out waiting for ${RUN_CONFIG_FILE}`);
    await sleep(opts.pollMs);
  }
  let config: RunConfig;
  try {
    config = RunConfigSchema.parse(await readSealed(configPath, opts.pollMs));
  } catch (err) {
    diagnostic(runDir, RUN_CONFIG_FILE, err);
    throw err;
  }
  const data = loadDataset(runDir);
  const rowOf = new Map<number, number>();
  for (let i = 0; i < data.n; i++) rowOf.set(data.ids[i], i);

  const model = new LinearModel(data.d, data.labels);
  const train = {
    learningRate: config.trainer.learning_rate,
    batchSize: config.trainer.batch_size,
    passes: config.trainer.passes_per_cycle,
    seed: config.trainer.seed,
  };

  let stage = config.mode === "fixed" ? 1 : 0;
  for (;;) {
    const mPath = manifestPath(runDir, stage);
    while (!existsSync(mPath)) {
      if (existsSync(join(runDir, DONE_MARKER))) {
        writeFinalMetrics(runDir, model);
        return 0;
      }
      if (Date.now() > deadline) {
        throw new AdapterError(`timed out waiting for stage ${stage} manifest`);
      }
      await sleep(opts.pollMs);
    }
    let manifest: Manifest;
    try {
      manifest = ManifestSchema.parse(await readSealed(mPath, opts.pollMs));
    } catch (err) {
      diagnostic(runDir, mPath, err);
      throw err instanceof ZodError ? new AdapterError(`manifest schema violation: ${err}`) : err;
    }
    if (manifest.stage !== stage) {
      diagnostic(runDir, mPath, `expected stage ${stage}, file says ${manifest.stage}`);
      throw new AdapterError(`manifest stage mismatch at ${mPath}`);
    }
    const rows = new Int32Array(manifest.samples.length);
    manifest.samples.forEach((id, i) => {
      const row = rowOf.get(id);
      if (row === undefined) {
        diagnostic(runDir, mPath, `unknown sample id ${id}`);
        throw new AdapterError(`manifest references unknown sample ${id}`);
      }
      rows[i] = row;
    });
    for (let cycle = 1; cycle <= manifest.cycles; cycle++) {
      trainCycle(model, data, rows, train, stage, cycle);
      if (!existsSync(reportPath(runDir, stage, cycle))) {
        writeReport(runDir, model, data, stage, cycle);
      }
    }
    stage += 1;
  }
}
