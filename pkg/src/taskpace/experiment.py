"""Experiment arms: vanilla baselines vs fixed and dynamic curricula, plus reporting."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import protocol
from .dataset import Dataset, write_jsonl
from .lexicon import TypeLexicon, default_lexicon
from .scheduler import (
    EmbeddedTrainer,
    ExternalTrainer,
    MetricsLog,
    ScheduleRunner,
    SchedulerConfig,
)
from .synthetic import SyntheticSpec, generate_synthetic
from .trainer import TrainConfig

# Learning rate used by the shipped synthetic benchmark arms; the TrainConfig
# default (0.05) is far below the regime where any arm leaves the
# majority-prediction plateau within the pass budget.
BENCHMARK_LEARNING_RATE = 2.0

KNOWN_ARMS = ("vanilla", "fixed", "dynamic", "simple")


@dataclass(frozen=True)
class RunConfig:
    """One simulate invocation: dataset source, scheduler, arms, seeds."""

    out_dir: str
    synthetic: SyntheticSpec | None = None
    train_path: str | None = None
    test_id_path: str | None = None
    test_ood_path: str | None = None
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    trainer: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=BENCHMARK_LEARNING_RATE))
    trainer_mode: str = "embedded"  # | "external"
    arms: tuple[str, ...] = ("vanilla", "dynamic")
    seeds: tuple[int, ...] = (0,)
    data_fraction: float = 1.0

    def __post_init__(self):
        if (self.synthetic is None) == (self.train_path is None):
            raise ValueError("exactly one dataset source: synthetic spec or train_path")
        if self.trainer_mode not in ("embedded", "external"):
            raise ValueError(f"unknown trainer mode {self.trainer_mode!r}")
        if not 0.0 < self.data_fraction <= 1.0:
            raise ValueError("data_fraction must lie in (0, 1]")
        for arm in self.arms:
            if parse_arm(arm)[0] not in KNOWN_ARMS:
                raise ValueError(f"unknown arm {arm!r}")


def parse_arm(arm: str) -> tuple[str, str | None]:
    """"dynamic:easy_to_hard" -> ("dynamic", "easy_to_hard")."""
    name, _, direction = arm.partition(":")
    return name, direction or None


def subsample(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Uniform subsample of the training set for low-data-regime sweeps."""
    if fraction >= 1.0:
        return dataset
    n = len(dataset.samples)
    keep = max(1, round(fraction * n))
    rng = np.random.default_rng([seed, 9090])
    idx = np.sort(rng.choice(n, size=keep, replace=False))
    return Dataset([dataset.samples[i] for i in idx], dataset.num_labels, dataset.feature_dim)


def load_splits(cfg: RunConfig, seed: int) -> tuple[Dataset, Dataset | None, Dataset | None]:
    from .dataset import read_jsonl

    if cfg.synthetic is not None:
        spec = replace(cfg.synthetic, seed=seed)
        train, test_id, test_ood = generate_synthetic(spec)
    else:
        train = read_jsonl(cfg.train_path)
        test_id = read_jsonl(cfg.test_id_path) if cfg.test_id_path else None
        test_ood = read_jsonl(cfg.test_ood_path) if cfg.test_ood_path else None
    train = subsample(train, cfg.data_fraction, seed)
    return train, test_id, test_ood


def run_vanilla(
    train: Dataset,
    eval_splits: dict[str, Dataset],
    total_passes: int,
    train_cfg: TrainConfig,
    lexicon: TypeLexicon | None,
    run_dir: Path,
) -> dict:
    """Plain full-data training for the same total pass budget as a curriculum run."""
    run_dir.mkdir(parents=True, exist_ok=True)
    trainer = EmbeddedTrainer(train, train_cfg, eval_splits, lexicon)
    metrics = MetricsLog(run_dir / "metrics.csv")
    all_ids = [s.sample_id for s in train.samples]
    for i in range(1, total_passes + 1):
        t0 = time.perf_counter()
        report = trainer.run_cycle(run_dir, 0, i, all_ids)
        metrics.append(0, i, trainer.evaluations(), report.mean_loss(), (time.perf_counter() - t0) * 1e3)
    summary = {"arm": "vanilla", "passes": total_passes, "final": finals(trainer)}
    protocol.write_done(run_dir, summary)
    return summary


def finals(trainer: EmbeddedTrainer) -> dict:
    out = {}
    for ev in trainer.evaluations():
        out[ev.split] = {"overall": ev.overall, "groups": {g.value: a for g, a in ev.group_accuracy.items()}}
        if ev.vqa_score is not None:
            out[ev.split]["vqa_score"] = ev.vqa_score
    return out


def run_arm(arm: str, cfg: RunConfig, seed: int, arm_dir: Path, lexicon: TypeLexicon | None = None) -> dict:
    """Execute one (arm, seed) run and return its summary entry."""
    name, direction = parse_arm(arm)
    train, test_id, test_ood = load_splits(cfg, seed)
    eval_splits = {}
    if test_id is not None:
        eval_splits["id"] = test_id
    if test_ood is not None:
        eval_splits["ood"] = test_ood
    sched = replace(cfg.scheduler, seed=seed)
    if direction is not None:
        sched = replace(sched, direction=direction)
    if name == "simple":
        sched = replace(sched, difficulty_mode="mean")
    train_cfg = replace(cfg.trainer, seed=seed)
    total_passes = sched.warmup_cycles + sched.stages * sched.cycles

    arm_dir.mkdir(parents=True, exist_ok=True)
    if name == "vanilla":
        summary = {**run_vanilla(train, eval_splits, total_passes, train_cfg, lexicon, arm_dir), "arm": arm}
    else:
        if cfg.synthetic is not None:
            dataset_spec = {"synthetic": replace(cfg.synthetic, seed=seed).to_json()}
        else:
            dataset_spec = {
                "train_path": cfg.train_path,
                "test_id_path": cfg.test_id_path,
                "test_ood_path": cfg.test_ood_path,
            }
        protocol.write_run_config(arm_dir, {
            "mode": name, "arm": arm, "scheduler": sched.to_json(),
            "trainer": {"learning_rate": train_cfg.learning_rate, "batch_size": train_cfg.batch_size,
                        "passes_per_cycle": train_cfg.passes_per_cycle, "seed": train_cfg.seed},
            "dataset": dataset_spec, "data_fraction": cfg.data_fraction,
        })
        if cfg.trainer_mode == "external":
            write_jsonl(train, arm_dir / protocol.DATASET_FILE)
            for split, ds in eval_splits.items():
                write_jsonl(ds, arm_dir / f"test_{split}.jsonl")
            trainer = ExternalTrainer()
        else:
            trainer = EmbeddedTrainer(train, train_cfg, eval_splits, lexicon)
        runner = ScheduleRunner(sched, train, trainer, arm_dir, lexicon)
        run_summary = runner.run_fixed() if name == "fixed" else runner.run_dynamic()
        summary = {"arm": arm, **run_summary}
        if isinstance(trainer, EmbeddedTrainer):
            summary["final"] = finals(trainer)
        else:
            # The external trainer publishes its final metrics after it sees
            # the done marker; give it a moment.
            ext_metrics = arm_dir / "trainer_metrics.json"
            deadline = time.monotonic() + 15.0
            while not ext_metrics.exists() and time.monotonic() < deadline:
                time.sleep(0.05)
            if ext_metrics.exists():
                summary["final"] = json.loads(ext_metrics.read_text()).get("final", {})
    summary["seed"] = seed
    return summary


def simulate(cfg: RunConfig, lexicon: TypeLexicon | None = None) -> dict:
    """Run every (arm, seed) pair and write the aggregate summary JSON."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if lexicon is None and cfg.synthetic is None:
        lexicon = default_lexicon()
    runs = []
    for arm in cfg.arms:
        for seed in cfg.seeds:
            arm_dir = out / f"{arm.replace(':', '_')}_seed{seed}"
            runs.append(run_arm(arm, cfg, seed, arm_dir, lexicon))
    summary = {
        "seeds": list(cfg.seeds),
        "data_fraction": cfg.data_fraction,
        "arms": {},
        "runs": runs,
    }
    for arm in cfg.arms:
        entries = [r for r in runs if r["arm"] == arm and "final" in r]
        agg = {}
        for split in ("id", "ood"):
            vals = [r["final"][split]["overall"] for r in entries if split in r.get("final", {})]
            if vals:
                agg[f"median_{split}"] = float(np.median(vals))
        summary["arms"][arm] = agg
    text = json.dumps(summary, indent=1, sort_keys=True)
    protocol.atomic_write(out / "summary.json", text + "\n")
    return summary


# ---------------------------------------------------------------------------
# Reporting

def report(run_dir: str | Path) -> dict:
    """Collect per-run metrics into one tidy CSV and a markdown comparison table."""
    run_dir = Path(run_dir)
    rows = []
    header = None
    for metrics in sorted(run_dir.glob("**/metrics.csv")):
        arm = metrics.parent.name
        with open(metrics) as f:
            lines = f.read().splitlines()
        if not lines:
            continue
        header = lines[0]
        rows.extend(f"{arm},{line}" for line in lines[1:])
    warnings_out = []
    if header is None:
        warnings_out.append(f"no metrics found under {run_dir}")
        combined = ""
    else:
        combined = "run," + header + "\n" + "\n".join(rows) + ("\n" if rows else "")
    (run_dir / "report.csv").write_text(combined)

    summary_path = run_dir / "summary.json"
    table = ["| arm | median ID | median OOD | OOD delta vs first arm |", "| --- | --- | --- | --- |"]
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
        base = None
        for arm, agg in summary.get("arms", {}).items():
            mid = agg.get("median_id")
            mood = agg.get("median_ood")
            if base is None and mood is not None:
                base = mood
            delta = "" if mood is None or base is None else f"{mood - base:+.4f}"
            fmt = lambda v: "" if v is None else f"{v:.4f}"
            table.append(f"| {arm} | {fmt(mid)} | {fmt(mood)} | {delta} |")
    else:
        warnings_out.append("no summary.json; markdown table is empty")
    (run_dir / "report.md").write_text("\n".join(table) + "\n")
    return {"rows": len(rows), "warnings": warnings_out}
