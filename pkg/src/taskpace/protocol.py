"""Wire formats for the scheduler/trainer file protocol.

Everything is JSON or JSON Lines, written atomically (temp file + rename) and
stamped with a hex-encoded 64-bit checksum so independent trainer processes
can verify what they read. Floats are serialized with Python's shortest
round-trip repr, which keeps repeated runs byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from pathlib import Path

import numpy as np

from .difficulty import LossReport

SCHEMA_VERSION = 1

MANIFEST_DIR = "manifests"
REPORT_DIR = "reports"
DONE_MARKER = "done.json"
RUN_CONFIG_FILE = "run_config.json"
DATASET_FILE = "dataset.jsonl"
STATE_FILE = "state.json"


class ProtocolError(RuntimeError):
    """Schema violation, checksum failure or version mismatch in a protocol file."""


class ProtocolTimeout(ProtocolError):
    """A protocol peer did not produce an expected file in time."""


def checksum64(data: bytes) -> str:
    # First 64 bits of SHA-256: reproducible from any language's standard crypto.
    return hashlib.sha256(data).hexdigest()[:16]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def atomic_write(path: str | Path, data: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def _check_version(record: dict, path: Path) -> None:
    v = record.get("schema_version")
    if v != SCHEMA_VERSION:
        raise ProtocolError(f"{path}: schema_version {v!r} not supported (expected {SCHEMA_VERSION})")


def _sealed(record: dict) -> dict:
    body = {k: v for k, v in record.items() if k != "checksum"}
    return {**record, "checksum": checksum64(canonical_json(body).encode())}


def _verify_seal(record: dict, path: Path) -> None:
    body = {k: v for k, v in record.items() if k != "checksum"}
    expect = checksum64(canonical_json(body).encode())
    if record.get("checksum") != expect:
        raise ProtocolError(f"{path}: checksum mismatch (file corrupt or stale)")


# ---------------------------------------------------------------------------
# Curriculum manifests

def manifest_path(run_dir: str | Path, stage: int) -> Path:
    name = "warmup.json" if stage == 0 else f"stage_{stage:03d}.json"
    return Path(run_dir) / MANIFEST_DIR / name


def write_manifest(run_dir: str | Path, manifest: dict) -> Path:
    path = manifest_path(run_dir, manifest["stage"])
    path.parent.mkdir(parents=True, exist_ok=True)
    record = _sealed({"schema_version": SCHEMA_VERSION, **manifest})
    atomic_write(path, canonical_json(record) + "\n")
    return path


def read_manifest(path: str | Path) -> dict:
    path = Path(path)
    with open(path) as f:
        record = json.load(f)
    _check_version(record, path)
    _verify_seal(record, path)
    return record


# ---------------------------------------------------------------------------
# Loss reports

def report_path(run_dir: str | Path, iteration: int, cycle: int) -> Path:
    return Path(run_dir) / REPORT_DIR / f"r{iteration:03d}_b{cycle:02d}.jsonl"


def dump_loss_report(report: LossReport) -> str:
    lines = [
        canonical_json({"id": int(i), "task": int(t), "loss": float(l)})
        for i, t, l in zip(report.sample_ids, report.task_ids, report.losses)
    ]
    body = "\n".join(lines)
    header = _sealed({
        "schema_version": SCHEMA_VERSION,
        "iteration": report.iteration,
        "cycle": report.cycle,
        "n": len(report),
        "checksum_body": checksum64(body.encode()),
    })
    return canonical_json(header) + "\n" + body + "\n"


def write_loss_report(run_dir: str | Path, report: LossReport) -> Path:
    path = report_path(run_dir, report.iteration, report.cycle)
    path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write(path, dump_loss_report(report))
    return path


def parse_loss_report(text: str, path: Path) -> LossReport:
    lines = text.splitlines()
    if not lines:
        raise ProtocolError(f"{path}: empty report")
    header = json.loads(lines[0])
    _check_version(header, path)
    _verify_seal(header, path)
    body = lines[1:]
    if len(body) != header["n"]:
        raise ProtocolError(f"{path}: header says n={header['n']} but found {len(body)} records")
    if checksum64("\n".join(body).encode()) != header["checksum_body"]:
        raise ProtocolError(f"{path}: body checksum mismatch")
    ids = np.empty(len(body), dtype=np.int64)
    tasks = np.empty(len(body), dtype=np.int64)
    losses = np.empty(len(body), dtype=np.float64)
    for k, line in enumerate(body):
        rec = json.loads(line)
        ids[k] = rec["id"]
        tasks[k] = rec["task"]
        losses[k] = rec["loss"]
    return LossReport(header["iteration"], header["cycle"], ids, tasks, losses)


def read_loss_report(path: str | Path) -> LossReport:
    path = Path(path)
    with open(path) as f:
        return parse_loss_report(f.read(), path)


def wait_for_report(
    run_dir: str | Path,
    iteration: int,
    cycle: int,
    timeout_s: float = 120.0,
    poll_s: float = 0.05,
) -> LossReport:
    """Block until the trainer publishes the report for (iteration, cycle)."""
    path = report_path(run_dir, iteration, cycle)
    deadline = time.monotonic() + timeout_s
    while True:
        if path.exists():
            try:
                return read_loss_report(path)
            except ProtocolError:
                # Atomic renames make half-written files impossible; a failed
                # read here is corruption, but give the writer one grace poll.
                time.sleep(poll_s)
                return read_loss_report(path)
        if time.monotonic() > deadline:
            raise ProtocolTimeout(
                f"no loss report for stage {iteration} cycle {cycle} after {timeout_s:.0f}s ({path})"
            )
        time.sleep(poll_s)


# ---------------------------------------------------------------------------
# Run lifecycle

def write_run_config(run_dir: str | Path, config: dict) -> Path:
    path = Path(run_dir) / RUN_CONFIG_FILE
    record = _sealed({"schema_version": SCHEMA_VERSION, **config})
    atomic_write(path, canonical_json(record) + "\n")
    return path


def read_run_config(run_dir: str | Path) -> dict:
    path = Path(run_dir) / RUN_CONFIG_FILE
    with open(path) as f:
        record = json.load(f)
    _check_version(record, path)
    _verify_seal(record, path)
    return record


def write_done(run_dir: str | Path, summary: dict) -> Path:
    path = Path(run_dir) / DONE_MARKER
    record = _sealed({"schema_version": SCHEMA_VERSION, "status": "complete", **summary})
    atomic_write(path, canonical_json(record) + "\n")
    return path


def run_is_done(run_dir: str | Path) -> bool:
    return (Path(run_dir) / DONE_MARKER).exists()
