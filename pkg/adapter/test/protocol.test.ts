import { describe, expect, it } from "vitest";

import {
  canonicalJson,
  checksum64,
  sealRecord,
  verifySealedRecord,
} from "../src/protocol.js";
import { buildDataset, keyedRng, LinearModel, sampleLoss, trainCycle } from "../src/model.js";

describe("checksum and canonical form", () => {
  it("matches the scheduler's truncated sha256", () => {
    // Reference value produced by the scheduler implementation.
    expect(checksum64("hello")).toBe("2cf24dba5fb0a30e");
  });

  it("sorts keys and omits whitespace like the scheduler", () => {
    const rec = { b: 1, a: [1, 2], c: { z: null, y: "s" } };
    expect(canonicalJson(rec)).toBe('{"a":[1,2],"b":1,"c":{"y":"s","z":null}}');
  });

  it("verifies a record sealed by the scheduler, floats intact", () => {
    // Byte-for-byte fixture captured from the scheduler (note the float tail).
    const raw =
      '{"checksum":"9f092e264adee61e","fraction":0.30000000000000004,"schema_version":1,"stage":2,"tasks":[3,1]}';
    const rec = verifySealedRecord(raw, "fixture");
    expect(rec.stage).toBe(2);
  });

  it("round-trips its own seals regardless of checksum key position", () => {
    const sealed = sealRecord({ schema_version: 1, alpha: 3, zulu: "x" });
    const text = canonicalJson(sealed);
    expect(verifySealedRecord(text, "self").alpha).toBe(3);
  });

  it("rejects tampered records", () => {
    const sealed = sealRecord({ schema_version: 1, n: 5 });
    const text = canonicalJson(sealed).replace('"n":5', '"n":6');
    expect(() => verifySealedRecord(text, "bad")).toThrow(/checksum/);
  });

  it("rejects unknown schema versions", () => {
    const sealed = sealRecord({ schema_version: 9, n: 5 });
    expect(() => verifySealedRecord(canonicalJson(sealed), "v9")).toThrow(/schema_version/);
  });
});

describe("local classifier", () => {
  const records = Array.from({ length: 60 }, (_, i) => ({
    sample_id: i,
    features: [i % 2 === 0 ? 1 : -1, 1],
    answer: [i % 2],
    task_type: i % 3,
  }));

  it("is deterministic in (seed, stage, cycle)", () => {
    const data = buildDataset(records);
    const a = new LinearModel(data.d, data.labels);
    const b = new LinearModel(data.d, data.labels);
    const rows = new Int32Array(data.n).map((_, i) => i);
    const opts = { learningRate: 0.5, batchSize: 8, passes: 1, seed: 7 };
    trainCycle(a, data, rows, opts, 1, 1);
    trainCycle(b, data, rows, opts, 1, 1);
    expect(Array.from(a.weights)).toEqual(Array.from(b.weights));
    const c = new LinearModel(data.d, data.labels);
    trainCycle(c, data, rows, opts, 1, 2);
    expect(Array.from(c.weights)).not.toEqual(Array.from(a.weights));
  });

  it("learns a separable rule and drives losses down", () => {
    const data = buildDataset(records);
    const model = new LinearModel(data.d, data.labels);
    const rows = new Int32Array(data.n).map((_, i) => i);
    const before = sampleLoss(model, data, 0);
    for (let c = 1; c <= 30; c++) {
      trainCycle(model, data, rows, { learningRate: 1.0, batchSize: 8, passes: 1, seed: 1 }, 0, c);
    }
    let hits = 0;
    for (let i = 0; i < data.n; i++) if (model.predict(data, i) === i % 2) hits++;
    expect(hits / data.n).toBeGreaterThan(0.95);
    expect(sampleLoss(model, data, 0)).toBeLessThan(before);
  });

  it("keyed rng streams are stable and key-sensitive", () => {
    const a = keyedRng(1, 2, 3);
    const b = keyedRng(1, 2, 3);
    const c = keyedRng(1, 2, 4);
    const seqA = [a(), a(), a()];
    expect([b(), b(), b()]).toEqual(seqA);
    expect([c(), c(), c()]).not.toEqual(seqA);
    for (const v of seqA) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThan(1);
    }
  });
});
