/**
 * The adapter's own tiny classifier: a linear model under per-class sigmoid
 * cross-entropy, trained with seeded mini-batch gradient descent. Independent
 * of the scheduler's implementation; only the file protocol is shared.
 */

import type { SampleRecord } from "./schemas.js";

export interface DatasetView {
  ids: Int32Array;
  tasks: Int32Array;
  features: Float64Array; // n x d row-major
  targets: Float64Array; // n x L row-major multi-hot
  answers: number[][];
  n: number;
  d: number;
  labels: number;
}

export function buildDataset(records: SampleRecord[]): DatasetView {
  const n = records.length;
  const d = records[0].features.length;
  const labels = Math.max(...records.map((r) => Math.max(...r.answer))) + 1;
  const view: DatasetView = {
    ids: new Int32Array(n),
    tasks: new Int32Array(n),
    features: new Float64Array(n * d),
    targets: new Float64Array(n * labels),
    answers: records.map((r) => r.answer),
    n,
    d,
    labels,
  };
  records.forEach((r, i) => {
    view.ids[i] = r.sample_id;
    view.tasks[i] = r.task_type;
    view.features.set(r.features, i * d);
    for (const a of r.answer) view.targets[i * labels + a] = 1.0;
  });
  return view;
}

export class LinearModel {
  weights: Float64Array; // d x L
  bias: Float64Array;

  constructor(public d: number, public labels: number) {
    this.weights = new Float64Array(d * labels);
    this.bias = new Float64Array(labels);
  }

  logits(data: DatasetView, row: number, out: Float64Array): void {
    const { d, labels } = this;
    out.set(this.bias);
    const base = row * d;
    for (let j = 0; j < d; j++) {
      const x = data.features[base + j];
      if (x === 0) continue;
      const wBase = j * labels;
      for (let c = 0; c < labels; c++) out[c] += x * this.weights[wBase + c];
    }
  }

  predict(data: DatasetView, row: number): number {
    const z = new Float64Array(this.labels);
    this.logits(data, row, z);
    let best = 0;
    for (let c = 1; c < this.labels; c++) if (z[c] > z[best]) best = c;
    return best;
  }
}

function sigmoid(z: number): number {
  return 1 / (1 + Math.exp(-Math.max(-500, Math.min(500, z))));
}

/** Stable per-class sigmoid cross-entropy, averaged over classes. */
export function sampleLoss(model: LinearModel, data: DatasetView, row: number): number {
  const L = model.labels;
  const z = new Float64Array(L);
  model.logits(data, row, z);
  let total = 0;
  for (let c = 0; c < L; c++) {
    const y = data.targets[row * L + c];
    total += Math.max(z[c], 0) - z[c] * y + Math.log1p(Math.exp(-Math.abs(z[c])));
  }
  return total / L;
}

/** splitmix32: deterministic stream from a key tuple, for shuffling. */
export function keyedRng(...key: number[]): () => number {
  let state = 0x9e3779b9;
  for (const k of key) {
    state = (state ^ Math.imul(k + 0x7f4a7c15, 0x85ebca6b)) >>> 0;
    state = (Math.imul(state ^ (state >>> 13), 0xc2b2ae35) ^ (state >>> 16)) >>> 0;
  }
  return () => {
    state = (state + 0x9e3779b9) >>> 0;
    let z = state;
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad);
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97);
    z = (z ^ (z >>> 15)) >>> 0;
    return z / 4294967296;
  };
}

function shuffled(n: number, rand: () => number): Int32Array {
  const order = new Int32Array(n);
  for (let i = 0; i < n; i++) order[i] = i;
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    const t = order[i];
    order[i] = order[j];
    order[j] = t;
  }
  return order;
}

export interface TrainOptions {
  learningRate: number;
  batchSize: number;
  passes: number;
  seed: number;
}

/** One training cycle over the given rows (manifest order), seeded per (stage, cycle). */
export function trainCycle(
  model: LinearModel,
  data: DatasetView,
  rows: Int32Array,
  opts: TrainOptions,
  stage: number,
  cycle: number,
): void {
  const { d, labels } = model;
  const z = new Float64Array(labels);
  const grad = new Float64Array(labels);
  for (let p = 0; p < opts.passes; p++) {
    const order = shuffled(rows.length, keyedRng(opts.seed, stage, cycle, p));
    for (let start = 0; start < rows.length; start += opts.batchSize) {
      const end = Math.min(start + opts.batchSize, rows.length);
      const count = end - start;
      const gw = new Float64Array(d * labels);
      const gb = new Float64Array(labels);
      for (let k = start; k < end; k++) {
        const row = rows[order[k]];
        model.logits(data, row, z);
        for (let c = 0; c < labels; c++) {
          grad[c] = (sigmoid(z[c]) - data.targets[row * labels + c]) / labels;
          gb[c] += grad[c];
        }
        const base = row * d;
        for (let j = 0; j < d; j++) {
          const x = data.features[base + j];
          if (x === 0) continue;
          const wBase = j * labels;
          for (let c = 0; c < labels; c++) gw[wBase + c] += x * grad[c];
        }
      }
      const step = opts.learningRate / count;
      for (let i = 0; i < gw.length; i++) model.weights[i] -= step * gw[i];
      for (let c = 0; c < labels; c++) model.bias[c] -= step * gb[c];
    }
  }
}

export function accuracy(model: LinearModel, data: DatasetView): number {
  let hits = 0;
  for (let i = 0; i < data.n; i++) {
    if (data.answers[i].includes(model.predict(data, i))) hits++;
  }
  return hits / data.n;
}
