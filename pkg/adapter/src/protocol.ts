/**
 * Wire-protocol helpers: 64-bit checksums, sealed-record verification, and
 * atomic writes matching the scheduler's file conventions.
 */

import { createHash } from "node:crypto";
import { mkdirSync, renameSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";

export const SCHEMA_VERSION = 1;

export function checksum64(data: string | Buffer): string {
  return createHash("sha256").update(data).digest("hex").slice(0, 16);
}

/** Canonical JSON for records of scalars/arrays/objects: sorted keys, no spaces. */
export function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const entries = Object.entries(value as Record<string, unknown>)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([k, v]) => JSON.stringify(k) + ":" + canonicalJson(v));
  return "{" + entries.join(",") + "}";
}

export class ProtocolError extends Error {}

/**
 * Verify a sealed single-record JSON file and return the parsed record.
 *
 * The seal covers the canonical serialization of the record without its
 * `checksum` field. Floats must survive byte-exact, so the seal body is
 * recovered by cutting the checksum member out of the raw text instead of
 * re-serializing parsed numbers.
 */
export function verifySealedRecord(raw: string, context: string): Record<string, unknown> {
  const record = JSON.parse(raw.trim()) as Record<string, unknown>;
  if (record.schema_version !== SCHEMA_VERSION) {
    throw new ProtocolError(`${context}: unsupported schema_version ${record.schema_version}`);
  }
  const seal = record.checksum;
  if (typeof seal !== "string") {
    throw new ProtocolError(`${context}: missing checksum`);
  }
  const token = `"checksum":"${seal}"`;
  const text = raw.trim();
  const idx = text.indexOf(token);
  if (idx < 0) {
    throw new ProtocolError(`${context}: checksum field not found in raw text`);
  }
  let body: string;
  if (text[idx + token.length] === ",") {
    body = text.slice(0, idx) + text.slice(idx + token.length + 1);
  } else if (text[idx - 1] === ",") {
    body = text.slice(0, idx - 1) + text.slice(idx + token.length);
  } else {
    throw new ProtocolError(`${context}: cannot excise checksum field`);
  }
  if (checksum64(body) !== seal) {
    throw new ProtocolError(`${context}: checksum mismatch (stale or corrupt)`);
  }
  return record;
}

/** Seal a record whose values are only ints/strings (safe to re-serialize). */
export function sealRecord(record: Record<string, unknown>): Record<string, unknown> {
  const body = { ...record };
  delete body.checksum;
  return { ...record, checksum: checksum64(canonicalJson(body)) };
}

export function atomicWrite(path: string, data: string): void {
  mkdirSync(dirname(path), { recursive: true });
  const tmp = path + ".tmp";
  writeFileSync(tmp, data);
  renameSync(tmp, path);
}

export function manifestPath(runDir: string, stage: number): string {
  const name = stage === 0 ? "warmup.json" : `stage_${String(stage).padStart(3, "0")}.json`;
  return join(runDir, "manifests", name);
}

export function reportPath(runDir: string, stage: number, cycle: number): string {
  const name = `r${String(stage).padStart(3, "0")}_b${String(cycle).padStart(2, "0")}.jsonl`;
  return join(runDir, "reports", name);
}

export const RUN_CONFIG_FILE = "run_config.json";
export const DATASET_FILE = "dataset.jsonl";
export const DONE_MARKER = "done.json";

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
