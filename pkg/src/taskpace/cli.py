"""Command-line surface: partition, plan, fixed-plan, simulate, report, resume, serve-trainer."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import protocol
from .dataset import (
    TaskPartition,
    ValidationError,
    coarse_partition,
    ingest_annotations,
    partition_by_type,
    read_jsonl,
    write_jsonl,
)
from .difficulty import ALPHA_PRESETS, ConsolidationWindow, divergence_vector, mean_difficulty, task_histograms
from .experiment import BENCHMARK_LEARNING_RATE, RunConfig, report, simulate
from .histograms import fit_grid
from .lexicon import GROUP_ORDER, TypeLexicon, default_lexicon
from .pacing import PacingConfig, PacingPlan
from .scheduler import (
    EmbeddedTrainer,
    ScheduleRunner,
    SchedulerConfig,
    plan_stage,
)
from .synthetic import SyntheticSpec
from .trainer import TrainConfig, evaluate, score_all, train_cycle
from .trainer import ToyModel

OUT_ROOT_ENV = "TASKPACE_OUT_ROOT"


def _out_path(p: str) -> Path:
    root = os.environ.get(OUT_ROOT_ENV)
    path = Path(p)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _load_lexicon(arg: str | None) -> TypeLexicon:
    return TypeLexicon.load(arg) if arg else default_lexicon()


# ---------------------------------------------------------------------------
# partition

def cmd_partition(args) -> int:
    lexicon = _load_lexicon(args.lexicon)
    if args.annotations:
        dataset = ingest_annotations(args.dataset, lexicon, args.min_answer_freq)
    else:
        dataset = read_jsonl(args.dataset)
    partition = partition_by_type(dataset.samples)
    groups = coarse_partition(partition, lexicon)
    summary = {
        "schema_version": protocol.SCHEMA_VERSION,
        "total_count": partition.total_count,
        "num_tasks": len(partition.tasks),
        "task_counts": {str(t): len(ids) for t, ids in sorted(partition.tasks.items())},
        "group_counts": {g.value: len(groups[g]) for g in GROUP_ORDER},
        "groups": {g.value: groups[g] for g in GROUP_ORDER},
        "tasks": {str(t): ids for t, ids in sorted(partition.tasks.items())},
    }
    out = _out_path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    protocol.atomic_write(out, protocol.canonical_json(summary) + "\n")
    if args.emit_dataset:
        write_jsonl(dataset, _out_path(args.emit_dataset))
    print(f"partitioned {partition.total_count} samples into {len(partition.tasks)} tasks -> {out}")
    return 0


def _partition_from_summary(path: str | Path) -> TaskPartition:
    with open(path) as f:
        data = json.load(f)
    return TaskPartition({int(t): ids for t, ids in data["tasks"].items()}, data["total_count"])


# ---------------------------------------------------------------------------
# plan (one scheduling step from loss reports on disk)

def cmd_plan(args) -> int:
    partition = _partition_from_summary(args.partition)
    report_files = sorted(Path(args.reports_dir).glob("r*_b*.jsonl"))
    if not report_files:
        print(f"error: no loss reports in {args.reports_dir}", file=sys.stderr)
        return 2
    reports = [protocol.read_loss_report(p) for p in report_files]
    reports.sort(key=lambda r: (r.iteration, r.cycle))
    grid = fit_grid(reports[0].losses, args.bins)

    if args.mode == "mean":
        difficulty = mean_difficulty(reports[-1])
    else:
        latest_iter = reports[-1].iteration
        window_reports = [r for r in reports if r.iteration == latest_iter]
        if len(window_reports) < args.cycles:
            print(
                f"error: need b=2..{args.cycles} reports of iteration {latest_iter} "
                f"to fill the window, found {len(window_reports)}",
                file=sys.stderr,
            )
            return 2
        window_reports = window_reports[-args.cycles:]
        window = ConsolidationWindow(args.cycles, tuple(args.alphas))
        prev = None
        for r in window_reports:
            hists = task_histograms(r, grid)
            if prev is not None:
                window.push(divergence_vector(prev, hists))
            prev = hists
        difficulty = window.consolidate()

    pacing = PacingConfig(mode=args.pacing, lambda0=args.lambda0, lambda_grow=args.lambda_grow)
    fraction = args.fraction if args.fraction is not None else pacing.fraction(args.stage_index)
    stage = plan_stage(difficulty, partition, fraction, args.direction, args.stage_index + 1)
    record = protocol._sealed({
        "schema_version": protocol.SCHEMA_VERSION,
        **stage.manifest(args.direction, args.cycles),
    })
    out = _out_path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    protocol.atomic_write(out, protocol.canonical_json(record) + "\n")
    diff_out = out.with_name(out.stem + "_difficulty.json")
    protocol.atomic_write(diff_out, protocol.canonical_json(difficulty.to_json(stage.stage_index)) + "\n")
    print(f"planned stage {stage.stage_index}: {len(stage.ordered_task_ids)} tasks, "
          f"{len(stage.included_sample_ids)} samples (fraction {fraction:.4f}) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# fixed-plan

def cmd_fixed_plan(args) -> int:
    from .scheduler import plan_fixed_stages

    partition = _partition_from_summary(args.partition)
    lexicon = _load_lexicon(args.lexicon)
    stages = plan_fixed_stages(partition, lexicon, PacingConfig(mode="discrete"))
    out = _out_path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for st in stages:
        record = protocol._sealed({
            "schema_version": protocol.SCHEMA_VERSION,
            **st.manifest("fixed", args.cycles),
        })
        protocol.atomic_write(out / f"stage_{st.stage_index:03d}.json", protocol.canonical_json(record) + "\n")
    fr = ", ".join(f"{s.fraction:.4f}" for s in stages)
    print(f"wrote {len(stages)} fixed stages (cumulative fractions {fr}) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# simulate

def _scheduler_from_args(args) -> SchedulerConfig:
    alphas = tuple(args.alphas) if args.alphas else ALPHA_PRESETS.get(args.alpha_mode, (0.1, 0.1, 0.3, 0.5))
    return SchedulerConfig(
        stages=args.stages,
        cycles=args.cycles,
        alphas=alphas,
        pacing=PacingConfig(mode=args.pacing, lambda0=args.lambda0, lambda_grow=args.lambda_grow),
        direction=args.direction,
        warmup_cycles=args.warmup_cycles,
        difficulty_mode=args.difficulty_mode,
        num_bins=args.bins,
        seed=args.seed,
    )


def cmd_simulate(args) -> int:
    sched = _scheduler_from_args(args)
    if args.dry_run:
        plan = PacingPlan.build(sched.pacing, sched.stages)
        print("planned schedule:", " ".join(f"{f:.2f}" for f in plan.fractions))
        return 0
    synthetic = None
    if not args.train:
        synthetic = SyntheticSpec(
            num_tasks=args.tasks,
            samples_per_task=args.samples_per_task,
            labels_per_task=args.labels_per_task,
            bias_strength=args.bias_strength,
            prior_shift=args.prior_shift,
            seed=args.seed,
        )
    cfg = RunConfig(
        out_dir=str(_out_path(args.out)),
        synthetic=synthetic,
        train_path=args.train,
        test_id_path=args.test_id,
        test_ood_path=args.test_ood,
        scheduler=sched,
        trainer=TrainConfig(learning_rate=args.learning_rate, batch_size=args.batch_size, seed=args.seed),
        trainer_mode=args.trainer_mode,
        arms=tuple(args.arms.split(",")),
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        data_fraction=args.data_fraction,
    )
    summary = simulate(cfg)
    print(json.dumps(summary["arms"], indent=1, sort_keys=True))
    print(f"run directory: {cfg.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# report / resume

def cmd_report(args) -> int:
    info = report(_out_path(args.run_dir))
    for w in info["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"report written ({info['rows']} metric rows) -> {args.run_dir}/report.csv, report.md")
    return 0


def cmd_resume(args) -> int:
    run_dir = _out_path(args.run_dir)
    if protocol.run_is_done(run_dir):
        print("run already complete; nothing to resume")
        return 0
    rc = protocol.read_run_config(run_dir)
    sched = SchedulerConfig.from_json(rc["scheduler"])
    tr = rc["trainer"]
    train_cfg = TrainConfig(
        learning_rate=tr["learning_rate"], batch_size=tr["batch_size"],
        passes_per_cycle=tr.get("passes_per_cycle", 1), seed=tr["seed"],
    )
    ds_spec = rc["dataset"]
    if "synthetic" in ds_spec:
        from .experiment import subsample
        from .synthetic import generate_synthetic

        spec = SyntheticSpec.from_json(ds_spec["synthetic"])
        train, test_id, test_ood = generate_synthetic(spec)
        eval_splits = {"id": test_id, "ood": test_ood}
        train = subsample(train, rc.get("data_fraction", 1.0), spec.seed)
    else:
        train = read_jsonl(ds_spec["train_path"])
        eval_splits = {}
        for split in ("id", "ood"):
            p = ds_spec.get(f"test_{split}_path")
            if p:
                eval_splits[split] = read_jsonl(p)
    lexicon = default_lexicon() if rc.get("mode") == "fixed" else None
    trainer = EmbeddedTrainer(train, train_cfg, eval_splits, lexicon)
    runner = ScheduleRunner(sched, train, trainer, run_dir, lexicon)
    summary = runner.resume()
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# serve-trainer: the embedded trainer driven purely through the file protocol,
# as an out-of-process reference client for external-trainer integrations.

def cmd_serve_trainer(args) -> int:
    run_dir = _out_path(args.run_dir)
    deadline = time.monotonic() + args.timeout
    config_path = run_dir / protocol.RUN_CONFIG_FILE
    while not config_path.exists():
        if time.monotonic() > deadline:
            print(f"error: no {protocol.RUN_CONFIG_FILE} in {run_dir}", file=sys.stderr)
            return 2
        time.sleep(args.poll)
    rc = protocol.read_run_config(run_dir)
    dataset = read_jsonl(run_dir / protocol.DATASET_FILE)
    tr = rc["trainer"]
    cfg = TrainConfig(
        learning_rate=tr["learning_rate"], batch_size=tr["batch_size"],
        passes_per_cycle=tr.get("passes_per_cycle", 1), seed=tr["seed"],
    )
    index = {s.sample_id: i for i, s in enumerate(dataset.samples)}
    model = ToyModel.zeros(dataset.feature_dim, dataset.num_labels)
    stage = 0 if rc.get("mode") != "fixed" else 1
    while True:
        manifest_file = protocol.manifest_path(run_dir, stage)
        while not manifest_file.exists():
            if protocol.run_is_done(run_dir):
                _write_trainer_metrics(run_dir, model)
                print("run complete")
                return 0
            if time.monotonic() > deadline:
                print(f"error: timed out waiting for stage {stage} manifest", file=sys.stderr)
                return 2
            time.sleep(args.poll)
        manifest = protocol.read_manifest(manifest_file)
        rows = np.array([index[s] for s in manifest["samples"]], dtype=np.int64)
        for cycle in range(1, manifest["cycles"] + 1):
            done_already = protocol.report_path(run_dir, stage, cycle).exists()
            model = train_cycle(model, dataset.features[rows], dataset.targets[rows], cfg, pass_key=(stage, cycle))
            if not done_already:
                protocol.write_loss_report(run_dir, score_all(model, dataset, stage, cycle))
        stage += 1


def _write_trainer_metrics(run_dir: Path, model: ToyModel) -> None:
    final = {}
    for split in ("id", "ood"):
        path = run_dir / f"test_{split}.jsonl"
        if path.exists():
            ev = evaluate(model, read_jsonl(path), split)
            final[split] = {"overall": ev.overall, "groups": {g.value: a for g, a in ev.group_accuracy.items()}}
    record = {"schema_version": protocol.SCHEMA_VERSION, "final": final}
    protocol.atomic_write(run_dir / "trainer_metrics.json", protocol.canonical_json(record) + "\n")


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="taskpace", description="Task-progressive curriculum scheduling")
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("partition", help="split a dataset into question-type tasks")
    pp.add_argument("dataset")
    pp.add_argument("-o", "--output", required=True)
    pp.add_argument("--lexicon")
    pp.add_argument("--annotations", action="store_true", help="input is a VQA-style annotation array")
    pp.add_argument("--min-answer-freq", type=int, default=9)
    pp.add_argument("--emit-dataset", help="also write the ingested samples as JSONL")
    pp.set_defaults(func=cmd_partition)

    def scheduling_flags(sp, with_stages=True):
        sp.add_argument("--cycles", type=int, default=5)
        sp.add_argument("--alphas", type=float, nargs="+")
        sp.add_argument("--alpha-mode", choices=sorted(ALPHA_PRESETS), default="increasing")
        sp.add_argument("--direction", choices=["hard_to_easy", "easy_to_hard"], default="hard_to_easy")
        sp.add_argument("--pacing", choices=["incremental", "decremental", "discrete"], default="incremental")
        sp.add_argument("--lambda0", type=float, default=0.1)
        sp.add_argument("--lambda-grow", type=float, default=4.5)
        sp.add_argument("--bins", type=int, default=100)
        if with_stages:
            sp.add_argument("--stages", type=int, default=6)
            sp.add_argument("--warmup-cycles", type=int, default=5)
            sp.add_argument("--difficulty-mode", choices=["distributional", "mean"], default="distributional")

    pl = sub.add_parser("plan", help="one scheduling step from loss reports on disk")
    pl.add_argument("--partition", required=True)
    pl.add_argument("--reports-dir", required=True)
    pl.add_argument("--stage-index", type=int, default=0, help="zero-based pacing stage")
    pl.add_argument("--fraction", type=float, help="override the pacing fraction")
    pl.add_argument("--mode", choices=["distributional", "mean"], default="distributional")
    pl.add_argument("-o", "--output", required=True)
    scheduling_flags(pl, with_stages=False)
    pl.set_defaults(func=cmd_plan)

    fp = sub.add_parser("fixed-plan", help="write the coarse-group fixed curriculum manifests")
    fp.add_argument("--partition", required=True)
    fp.add_argument("--lexicon")
    fp.add_argument("--cycles", type=int, default=5)
    fp.add_argument("-o", "--output", required=True)
    fp.set_defaults(func=cmd_fixed_plan)

    sm = sub.add_parser("simulate", help="run experiment arms end to end")
    sm.add_argument("--out", required=True)
    sm.add_argument("--arms", default="vanilla,dynamic")
    sm.add_argument("--seeds", default="0")
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--trainer-mode", choices=["embedded", "external"], default="embedded")
    sm.add_argument("--data-fraction", type=float, default=1.0)
    sm.add_argument("--dry-run", action="store_true")
    sm.add_argument("--train", help="train split JSONL (default: synthetic benchmark)")
    sm.add_argument("--test-id")
    sm.add_argument("--test-ood")
    sm.add_argument("--tasks", type=int, default=8)
    sm.add_argument("--samples-per-task", type=int, default=2000)
    sm.add_argument("--labels-per-task", type=int, default=3)
    sm.add_argument("--bias-strength", type=float, default=0.9)
    sm.add_argument("--prior-shift", choices=["none", "reversed"], default="reversed")
    sm.add_argument("--learning-rate", type=float, default=BENCHMARK_LEARNING_RATE)
    sm.add_argument("--batch-size", type=int, default=64)
    scheduling_flags(sm)
    sm.set_defaults(func=cmd_simulate)

    rp = sub.add_parser("report", help="tidy CSV and markdown comparison for a run directory")
    rp.add_argument("run_dir")
    rp.set_defaults(func=cmd_report)

    rs = sub.add_parser("resume", help="continue an interrupted run")
    rs.add_argument("run_dir")
    rs.set_defaults(func=cmd_resume)

    st = sub.add_parser("serve-trainer", help="reference external trainer over the file protocol")
    st.add_argument("run_dir")
    st.add_argument("--timeout", type=float, default=300.0)
    st.add_argument("--poll", type=float, default=0.02)
    st.set_defaults(func=cmd_serve_trainer)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, protocol.ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
