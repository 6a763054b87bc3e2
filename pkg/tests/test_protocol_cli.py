import json
import subprocess
import sys

import numpy as np
import pytest

from taskpace import protocol
from taskpace.cli import main
from taskpace.dataset import read_jsonl, write_jsonl
from taskpace.difficulty import LossReport
from taskpace.synthetic import SyntheticSpec, generate_synthetic


def mk_report(iteration=0, cycle=1, n=6):
    rng = np.random.default_rng(iteration * 10 + cycle)
    return LossReport(
        iteration, cycle,
        np.arange(n), np.arange(n) % 3, rng.exponential(1.0, size=n),
    )


# -- wire formats -------------------------------------------------------------

def test_loss_report_roundtrip_exact(tmp_path):
    rep = mk_report()
    path = protocol.write_loss_report(tmp_path, rep)
    back = protocol.read_loss_report(path)
    assert np.array_equal(back.losses, rep.losses)  # bitwise float round-trip
    assert np.array_equal(back.sample_ids, rep.sample_ids)
    assert back.iteration == rep.iteration and back.cycle == rep.cycle


def test_loss_report_checksum_detects_corruption(tmp_path):
    path = protocol.write_loss_report(tmp_path, mk_report())
    text = path.read_text().replace("0.", "1.", 1)
    path.write_text(text)
    with pytest.raises(protocol.ProtocolError):
        protocol.read_loss_report(path)


def test_manifest_roundtrip_and_seal(tmp_path):
    manifest = {"stage": 2, "phase": "curriculum", "fraction": 0.3, "direction": "hard_to_easy",
                "cycles": 5, "tasks": [3, 1], "samples": [9, 8, 7], "difficulty": {"1": 0.5, "3": 0.9}}
    path = protocol.write_manifest(tmp_path, manifest)
    back = protocol.read_manifest(path)
    assert back["tasks"] == [3, 1] and back["samples"] == [9, 8, 7]
    raw = json.loads(path.read_text())
    raw["fraction"] = 0.4
    path.write_text(json.dumps(raw))
    with pytest.raises(protocol.ProtocolError, match="checksum"):
        protocol.read_manifest(path)


def test_unknown_schema_version_rejected(tmp_path):
    manifest = {"stage": 1, "phase": "curriculum", "fraction": 1.0, "direction": "fixed",
                "cycles": 1, "tasks": [], "samples": [], "difficulty": None}
    path = protocol.write_manifest(tmp_path, manifest)
    record = json.loads(path.read_text())
    record["schema_version"] = 99
    body = {k: v for k, v in record.items() if k != "checksum"}
    record["checksum"] = protocol.checksum64(protocol.canonical_json(body).encode())
    path.write_text(protocol.canonical_json(record))
    with pytest.raises(protocol.ProtocolError, match="schema_version"):
        protocol.read_manifest(path)


def test_wait_for_report_timeout(tmp_path):
    with pytest.raises(protocol.ProtocolTimeout, match="stage 4 cycle 2"):
        protocol.wait_for_report(tmp_path, 4, 2, timeout_s=0.2, poll_s=0.02)


# -- CLI: partition / plan / fixed-plan ----------------------------------------

@pytest.fixture()
def synth_files(tmp_path):
    spec = SyntheticSpec(num_tasks=4, samples_per_task=40, labels_per_task=2, seed=0)
    train, test_id, test_ood = generate_synthetic(spec)
    paths = {}
    for name, ds in (("train", train), ("test_id", test_id), ("test_ood", test_ood)):
        p = tmp_path / f"{name}.jsonl"
        write_jsonl(ds, p)
        paths[name] = p
    return tmp_path, paths


def test_cli_partition(synth_files, capsys):
    tmp_path, paths = synth_files
    out = tmp_path / "partition.json"
    assert main(["partition", str(paths["train"]), "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["total_count"] == 160
    assert data["num_tasks"] == 4
    assert data["group_counts"]["wh"] == 4  # ids 0..3 are wh prefixes
    assert set(data["tasks"]) == {"0", "1", "2", "3"}


def test_cli_partition_empty_input(tmp_path, capsys):
    empty = tmp_path / "none.jsonl"
    empty.write_text("")
    rc = main(["partition", str(empty), "-o", str(tmp_path / "p.json")])
    assert rc == 2
    assert "no samples" in capsys.readouterr().err


def test_cli_partition_duplicate_id(tmp_path, capsys):
    p = tmp_path / "dup.jsonl"
    line = '{"sample_id": 7, "features": [0.0], "answer": [0], "task_type": 0}\n'
    p.write_text(line + line)
    rc = main(["partition", str(p), "-o", str(tmp_path / "p.json")])
    assert rc == 2
    assert "7" in capsys.readouterr().err


def test_cli_plan_window(tmp_path, synth_files, capsys):
    tmp_path, paths = synth_files
    out = tmp_path / "partition.json"
    main(["partition", str(paths["train"]), "-o", str(out)])
    reports = tmp_path / "reports"
    reports.mkdir()
    train = read_jsonl(paths["train"])
    for cycle in (1, 2):
        rng = np.random.default_rng(cycle)
        rep = LossReport(0, cycle, train.sample_ids, train.task_ids, rng.exponential(1.0, len(train)))
        protocol.write_loss_report(tmp_path, rep)
    manifest_out = tmp_path / "m.json"
    rc = main([
        "plan", "--partition", str(out), "--reports-dir", str(tmp_path / "reports"),
        "--cycles", "2", "--alphas", "1.0", "--stage-index", "0", "-o", str(manifest_out),
    ])
    assert rc == 0
    m = protocol.read_manifest(manifest_out)
    assert m["fraction"] == pytest.approx(0.1)
    assert (tmp_path / "m_difficulty.json").exists()
    # Idempotent: rerunning produces identical bytes.
    before = manifest_out.read_bytes()
    main([
        "plan", "--partition", str(out), "--reports-dir", str(tmp_path / "reports"),
        "--cycles", "2", "--alphas", "1.0", "--stage-index", "0", "-o", str(manifest_out),
    ])
    assert manifest_out.read_bytes() == before


def test_cli_plan_incomplete_window(tmp_path, synth_files, capsys):
    tmp_path, paths = synth_files
    out = tmp_path / "partition.json"
    main(["partition", str(paths["train"]), "-o", str(out)])
    reports = tmp_path / "reports"
    reports.mkdir()
    train = read_jsonl(paths["train"])
    rep = LossReport(0, 1, train.sample_ids, train.task_ids, np.ones(len(train)))
    protocol.write_loss_report(tmp_path, rep)
    rc = main([
        "plan", "--partition", str(out), "--reports-dir", str(reports),
        "--cycles", "2", "--alphas", "1.0", "-o", str(tmp_path / "m.json"),
    ])
    assert rc == 2
    assert "need b=2..2" in capsys.readouterr().err


def test_cli_plan_identical_reports_tie_break(tmp_path, synth_files):
    tmp_path, paths = synth_files
    out = tmp_path / "partition.json"
    main(["partition", str(paths["train"]), "-o", str(out)])
    train = read_jsonl(paths["train"])
    losses = np.ones(len(train))
    for cycle in (1, 2):
        protocol.write_loss_report(tmp_path, LossReport(0, cycle, train.sample_ids, train.task_ids, losses))
    manifest_out = tmp_path / "m.json"
    main([
        "plan", "--partition", str(out), "--reports-dir", str(tmp_path / "reports"),
        "--cycles", "2", "--alphas", "1.0", "--fraction", "0.5", "-o", str(manifest_out),
    ])
    m = protocol.read_manifest(manifest_out)
    assert m["tasks"] == [0, 1]  # all divergences zero -> ascending task id


def test_cli_fixed_plan(tmp_path, synth_files):
    tmp_path, paths = synth_files
    out = tmp_path / "partition.json"
    main(["partition", str(paths["train"]), "-o", str(out)])
    plan_dir = tmp_path / "fixed"
    with pytest.warns(UserWarning):
        rc = main(["fixed-plan", "--partition", str(out), "-o", str(plan_dir)])
    assert rc == 0
    files = sorted(plan_dir.iterdir())
    assert len(files) == 1  # synthetic ids are all wh
    m = protocol.read_manifest(files[0])
    assert len(m["samples"]) == 160


def test_cli_simulate_dry_run(capsys):
    rc = main(["simulate", "--out", "/tmp/nowhere", "--dry-run"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "0.10 0.30 0.50 0.70 0.90 1.00" in out


def test_cli_report_empty_dir(tmp_path, capsys):
    rc = main(["report", str(tmp_path)])
    assert rc == 0
    assert "warning" in capsys.readouterr().err
    assert (tmp_path / "report.md").exists()


# -- simulate + resume + report (small end-to-end) -----------------------------

def test_cli_simulate_and_report(tmp_path, capsys):
    out = tmp_path / "exp"
    rc = main([
        "simulate", "--out", str(out), "--arms", "vanilla,dynamic,simple",
        "--seeds", "0", "--tasks", "3", "--samples-per-task", "30",
        "--labels-per-task", "2", "--stages", "2", "--cycles", "2",
        "--alphas", "1.0", "--warmup-cycles", "2", "--learning-rate", "1.0",
    ])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["arms"]) == {"vanilla", "dynamic", "simple"}
    for arm in summary["arms"].values():
        assert 0.0 <= arm["median_ood"] <= 1.0
    rc = main(["report", str(out)])
    assert rc == 0
    report_csv = (out / "report.csv").read_text()
    assert report_csv.startswith("run,stage,cycle,split")
    assert (out / "report.md").read_text().count("|") > 4


def test_cli_resume_interrupted_run(tmp_path, capsys):
    """An interrupted scheduled run resumes from run_config.json + state.json."""
    from taskpace.experiment import RunConfig, run_arm
    from taskpace.scheduler import EmbeddedTrainer, ScheduleRunner, SchedulerConfig
    from taskpace.trainer import TrainConfig

    spec = SyntheticSpec(num_tasks=3, samples_per_task=30, labels_per_task=2)
    sched = SchedulerConfig(stages=2, cycles=2, alphas=(1.0,), warmup_cycles=2, seed=0)
    cfg = RunConfig(out_dir=str(tmp_path), synthetic=spec,
                    scheduler=sched, trainer=TrainConfig(learning_rate=1.0), arms=("dynamic",))
    arm_dir = tmp_path / "dynamic_seed0"

    class Bomb(RuntimeError):
        pass

    real = EmbeddedTrainer.run_cycle
    calls = {"n": 0}

    def exploding(self, *a, **kw):
        calls["n"] += 1
        if calls["n"] > 3:
            raise Bomb()
        return real(self, *a, **kw)

    EmbeddedTrainer.run_cycle = exploding
    try:
        with pytest.raises(Bomb):
            run_arm("dynamic", cfg, 0, arm_dir)
    finally:
        EmbeddedTrainer.run_cycle = real
    assert not protocol.run_is_done(arm_dir)

    rc = main(["resume", str(arm_dir)])
    assert rc == 0
    assert protocol.run_is_done(arm_dir)
    manifests = sorted(f.name for f in (arm_dir / protocol.MANIFEST_DIR).iterdir())
    assert manifests == ["stage_001.json", "stage_002.json", "warmup.json"]


def test_cli_resume_completed_noop(tmp_path, capsys):
    out = tmp_path / "exp"
    main([
        "simulate", "--out", str(out), "--arms", "dynamic", "--seeds", "0",
        "--tasks", "2", "--samples-per-task", "20", "--labels-per-task", "2",
        "--stages", "2", "--cycles", "2", "--alphas", "1.0", "--warmup-cycles", "2",
    ])
    rc = main(["resume", str(out / "dynamic_seed0")])
    assert rc == 0
    assert "complete" in capsys.readouterr().out


# -- out-of-process protocol round trip ----------------------------------------

def test_round_trip_external_equals_embedded(tmp_path):
    """The embedded trainer driven out-of-process through files must reproduce
    the embedded in-process manifests byte for byte."""
    common = [
        "--arms", "dynamic", "--seeds", "3", "--seed", "3",
        "--tasks", "3", "--samples-per-task", "40", "--labels-per-task", "2",
        "--stages", "2", "--cycles", "2", "--alphas", "1.0", "--warmup-cycles", "2",
        "--learning-rate", "1.0",
    ]
    emb = tmp_path / "embedded"
    assert main(["simulate", "--out", str(emb), *common]) == 0

    ext = tmp_path / "external"
    ext_run = ext / "dynamic_seed3"
    proc = subprocess.Popen(
        [sys.executable, "-m", "taskpace.cli", "serve-trainer", str(ext_run), "--timeout", "60"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    try:
        rc = main(["simulate", "--out", str(ext), "--trainer-mode", "external", *common])
        assert rc == 0
        assert proc.wait(timeout=60) == 0, proc.stderr.read()
    finally:
        if proc.poll() is None:
            proc.kill()
    for name in ("warmup.json", "stage_001.json", "stage_002.json"):
        a = (emb / "dynamic_seed3" / protocol.MANIFEST_DIR / name).read_bytes()
        b = (ext_run / protocol.MANIFEST_DIR / name).read_bytes()
        assert a == b, f"{name} differs between embedded and external runs"
    metrics = json.loads((ext_run / "trainer_metrics.json").read_text())
    assert "final" in metrics
