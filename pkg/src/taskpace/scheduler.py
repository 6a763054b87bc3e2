"""Curriculum scheduling: warm-up, consolidation cycles, task sorting, stage assembly.

The dynamic loop trains a warm-up window on the full set, scores every sample
each cycle, turns consecutive scoring events into per-task divergences, and
plans each next stage as the smallest prefix of the difficulty-sorted tasks
that meets the pacing fraction. The fixed variant walks the coarse linguistic
groups instead and never scores.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import protocol
from .dataset import Dataset, TaskPartition, coarse_partition, partition_by_type
from .difficulty import (
    DEFAULT_ALPHAS,
    ConsolidationWindow,
    DifficultyVector,
    LossReport,
    divergence_vector,
    mean_difficulty,
    task_histograms,
)
from .histograms import DEFAULT_BINS, HistogramGrid, ScoreHistogram, build_histogram, fit_grid
from .lexicon import GROUP_ORDER, TypeLexicon
from .pacing import PacingConfig
from .trainer import EvalResult, ToyModel, TrainConfig, evaluate, score_all, train_cycle

ARTIFACT_VERSION = "0.1.0"

METRIC_COLUMNS = [
    "stage", "cycle", "split", "overall",
    "acc_wh", "acc_yesno", "acc_other", "acc_number",
    "vqa_score", "mean_train_loss", "wall_ms",
]


class ScheduleError(RuntimeError):
    """A stage could not be planned or executed; message carries stage/cycle context."""


@dataclass(frozen=True)
class SchedulerConfig:
    stages: int = 6  # R
    cycles: int = 5  # B
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    pacing: PacingConfig = field(default_factory=PacingConfig)
    direction: str = "hard_to_easy"  # | "easy_to_hard"
    warmup_cycles: int = 5
    difficulty_mode: str = "distributional"  # | "mean"
    num_bins: int = DEFAULT_BINS
    per_task_grid: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError("need at least one stage")
        if self.cycles < 2:
            raise ValueError("consolidation needs at least 2 cycles per stage")
        if len(self.alphas) != self.cycles - 1:
            raise ValueError(f"need {self.cycles - 1} alphas for {self.cycles} cycles")
        if self.direction not in ("hard_to_easy", "easy_to_hard"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.difficulty_mode not in ("distributional", "mean"):
            raise ValueError(f"unknown difficulty mode {self.difficulty_mode!r}")
        if self.difficulty_mode == "distributional" and self.warmup_cycles < self.cycles:
            raise ValueError(
                "distributional difficulty needs warmup_cycles >= cycles to fill the first window"
            )
        if self.warmup_cycles < 1:
            raise ValueError("warmup_cycles must be >= 1")

    def to_json(self) -> dict:
        return {
            "stages": self.stages,
            "cycles": self.cycles,
            "alphas": list(self.alphas),
            "pacing": {
                "mode": self.pacing.mode,
                "lambda0": self.pacing.lambda0,
                "lambda_grow": self.pacing.lambda_grow,
                "discrete_fractions": list(self.pacing.discrete_fractions),
            },
            "direction": self.direction,
            "warmup_cycles": self.warmup_cycles,
            "difficulty_mode": self.difficulty_mode,
            "num_bins": self.num_bins,
            "per_task_grid": self.per_task_grid,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SchedulerConfig":
        p = data.get("pacing", {})
        return cls(
            stages=data["stages"],
            cycles=data["cycles"],
            alphas=tuple(data["alphas"]),
            pacing=PacingConfig(
                mode=p.get("mode", "incremental"),
                lambda0=p.get("lambda0", 0.1),
                lambda_grow=p.get("lambda_grow", 4.5),
                discrete_fractions=tuple(p.get("discrete_fractions", (32 / 65, 61 / 65, 62 / 65, 1.0))),
            ),
            direction=data["direction"],
            warmup_cycles=data["warmup_cycles"],
            difficulty_mode=data["difficulty_mode"],
            num_bins=data["num_bins"],
            per_task_grid=data.get("per_task_grid", False),
            seed=data["seed"],
        )


@dataclass(frozen=True)
class CurriculumStage:
    """The concrete task subset exposed at one stage."""

    stage_index: int
    fraction: float
    ordered_task_ids: list[int]
    included_sample_ids: list[int]
    difficulty_snapshot: DifficultyVector | None

    def manifest(self, direction: str, cycles: int, phase: str = "curriculum") -> dict:
        diff = None
        if self.difficulty_snapshot is not None:
            diff = {str(t): s for t, s in sorted(self.difficulty_snapshot.scores.items())}
        return {
            "stage": self.stage_index,
            "phase": phase,
            "fraction": self.fraction,
            "direction": direction,
            "cycles": cycles,
            "tasks": self.ordered_task_ids,
            "samples": self.included_sample_ids,
            "difficulty": diff,
        }


def plan_stage(
    difficulty: DifficultyVector,
    partition: TaskPartition,
    fraction: float,
    direction: str,
    stage_index: int = 0,
) -> CurriculumStage:
    """Sort tasks by difficulty and take the minimal prefix meeting the fraction.

    Hard-to-easy sorts descending, easy-to-hard ascending; ties break on
    ascending task id. Tasks are whole units: the prefix stops at the first
    task that pushes the cumulative sample count to ceil(fraction * N).
    """
    if not 0.0 < fraction <= 1.0:
        raise ScheduleError(f"stage {stage_index}: fraction must lie in (0, 1], got {fraction}")
    missing = [t for t in partition.tasks if t not in difficulty.scores]
    if missing:
        raise ScheduleError(f"stage {stage_index}: no difficulty score for tasks {sorted(missing)}")
    sign = -1.0 if direction == "hard_to_easy" else 1.0
    order = sorted(partition.tasks, key=lambda t: (sign * difficulty.scores[t], t))
    need = math.ceil(fraction * partition.total_count)
    chosen: list[int] = []
    samples: list[int] = []
    for t in order:
        chosen.append(t)
        samples.extend(partition.tasks[t])
        if len(samples) >= need:
            break
    return CurriculumStage(stage_index, fraction, chosen, samples, difficulty)


def plan_fixed_stages(
    partition: TaskPartition,
    lexicon: TypeLexicon,
    pacing: PacingConfig,
) -> list[CurriculumStage]:
    """Cumulative coarse-group stages in the order wh, yesno, other, number.

    Groups absent from the dataset are skipped with a warning; the discrete
    fraction of a skipped group is carried forward by the cumulative design.
    """
    groups = coarse_partition(partition, lexicon)
    discrete = pacing.discrete_fractions
    stages: list[CurriculumStage] = []
    cumulative_tasks: list[int] = []
    for gi, group in enumerate(GROUP_ORDER):
        fraction = discrete[gi] if gi < len(discrete) else 1.0
        if not groups[group]:
            warnings.warn(f"fixed curriculum: dataset has no {group.value} questions; stage skipped")
            continue
        cumulative_tasks = cumulative_tasks + groups[group]
        samples = [sid for t in cumulative_tasks for sid in partition.tasks[t]]
        stages.append(CurriculumStage(len(stages) + 1, fraction, list(cumulative_tasks), samples, None))
    if not stages:
        raise ScheduleError("fixed curriculum: dataset is empty")
    return stages


@dataclass
class GridStore:
    """Histogram grids fixed by the first scoring event.

    The default is one global grid (upper edge = max loss over all samples),
    keeping per-task divergences commensurable for sorting. The per-task
    variant fits each task its own upper edge instead.
    """

    per_task: bool
    num_bins: int
    global_grid: HistogramGrid | None = None
    task_grids: dict[int, HistogramGrid] = field(default_factory=dict)

    @classmethod
    def fit(cls, report: LossReport, num_bins: int, per_task: bool) -> "GridStore":
        if per_task:
            grids = {
                int(t): fit_grid(report.losses[report.task_ids == t], num_bins)
                for t in np.unique(report.task_ids)
            }
            return cls(True, num_bins, None, grids)
        return cls(False, num_bins, fit_grid(report.losses, num_bins))

    def histograms(self, report: LossReport) -> dict[int, ScoreHistogram]:
        if not self.per_task:
            return task_histograms(report, self.global_grid)
        out: dict[int, ScoreHistogram] = {}
        for t in np.unique(report.task_ids):
            t = int(t)
            out[t] = build_histogram(report.losses[report.task_ids == t], self.task_grids[t])
        return out

    def to_json(self) -> dict:
        if self.per_task:
            return {"num_bins": self.num_bins,
                    "per_task": {str(t): g.upper for t, g in sorted(self.task_grids.items())}}
        return {"num_bins": self.num_bins, "upper": self.global_grid.upper}

    @classmethod
    def from_json(cls, data: dict) -> "GridStore":
        if "per_task" in data:
            grids = {int(t): HistogramGrid(data["num_bins"], u) for t, u in data["per_task"].items()}
            return cls(True, data["num_bins"], None, grids)
        return cls(False, data["num_bins"], HistogramGrid(data["num_bins"], data["upper"]))


# ---------------------------------------------------------------------------
# Trainer endpoints: the scheduler drives either the embedded model or an
# external process through the identical file protocol.

class EmbeddedTrainer:
    """In-process trainer endpoint holding the model checkpoint across stages."""

    def __init__(
        self,
        dataset: Dataset,
        train_config: TrainConfig,
        eval_splits: dict[str, Dataset] | None = None,
        lexicon: TypeLexicon | None = None,
        persist_reports: bool = False,
    ):
        self.dataset = dataset
        self.train_config = train_config
        self.eval_splits = eval_splits or {}
        self.lexicon = lexicon
        self.persist_reports = persist_reports
        self.model = ToyModel.zeros(dataset.feature_dim, dataset.num_labels)
        self._index = {s.sample_id: i for i, s in enumerate(dataset.samples)}

    def run_cycle(self, run_dir: Path, stage: int, cycle: int, sample_ids: list[int]) -> LossReport:
        rows = np.array([self._index[s] for s in sample_ids], dtype=np.int64)
        self.model = train_cycle(
            self.model,
            self.dataset.features[rows],
            self.dataset.targets[rows],
            self.train_config,
            pass_key=(stage, cycle),
        )
        report = score_all(self.model, self.dataset, stage, cycle)
        if self.persist_reports:
            protocol.write_loss_report(run_dir, report)
        return report

    def rescore(self, run_dir: Path, stage: int, cycle: int) -> LossReport:
        """Recreate a scoring event from the current checkpoint (used on resume)."""
        return score_all(self.model, self.dataset, stage, cycle)

    def evaluations(self) -> list[EvalResult]:
        return [
            evaluate(self.model, ds, split, self.lexicon) for split, ds in self.eval_splits.items()
        ]

    def save_checkpoint(self, path: Path) -> str:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as f:
            np.savez(f, weights=self.model.weights, bias=self.model.bias)
        tmp.replace(path)
        return protocol.checksum64(path.read_bytes())

    def load_checkpoint(self, path: Path, expected_checksum: str) -> None:
        digest = protocol.checksum64(path.read_bytes())
        if digest != expected_checksum:
            raise protocol.ProtocolError(f"{path}: checkpoint checksum mismatch")
        with np.load(path) as data:
            self.model = ToyModel(data["weights"].copy(), data["bias"].copy())


class ExternalTrainer:
    """Endpoint for a trainer running in another process, synchronized by files."""

    def __init__(self, timeout_s: float = 120.0, poll_s: float = 0.05):
        self.timeout_s = timeout_s
        self.poll_s = poll_s

    def run_cycle(self, run_dir: Path, stage: int, cycle: int, sample_ids: list[int]) -> LossReport:
        return protocol.wait_for_report(run_dir, stage, cycle, self.timeout_s, self.poll_s)

    def rescore(self, run_dir: Path, stage: int, cycle: int) -> LossReport:
        return protocol.read_loss_report(protocol.report_path(run_dir, stage, cycle))

    def evaluations(self) -> list[EvalResult]:
        return []

    def save_checkpoint(self, path: Path) -> str | None:
        return None

    def load_checkpoint(self, path: Path, expected_checksum: str) -> None:
        pass


# ---------------------------------------------------------------------------
# Metrics

class MetricsLog:
    """Append-only per-cycle metrics CSV with a locale-stable fixed column order."""

    def __init__(self, path: Path):
        self.path = path
        self.rows_written = 0
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as f:
                csv.writer(f).writerow(METRIC_COLUMNS)
        else:
            with open(path) as f:
                self.rows_written = max(0, sum(1 for _ in f) - 1)

    def append(self, stage: int, cycle: int, evals: list[EvalResult], mean_train_loss: float, wall_ms: float) -> None:
        rows = evals or [None]
        with open(self.path, "a", newline="") as f:
            w = csv.writer(f)
            for ev in rows:
                if ev is None:
                    w.writerow([stage, cycle, "train", "", "", "", "", "", "", f"{mean_train_loss:.17g}", f"{wall_ms:.3f}"])
                else:
                    g = ev.group_accuracy
                    w.writerow([
                        stage, cycle, ev.split, f"{ev.overall:.17g}",
                        *(f"{g[grp]:.17g}" for grp in GROUP_ORDER),
                        "" if ev.vqa_score is None else f"{ev.vqa_score:.17g}",
                        f"{mean_train_loss:.17g}", f"{wall_ms:.3f}",
                    ])
                self.rows_written += 1


# ---------------------------------------------------------------------------
# Run state (resume support)

@dataclass
class RunState:
    config: SchedulerConfig
    mode: str  # "dynamic" | "fixed"
    stage: int  # stage whose cycles are in progress
    cycles_done: int
    grid: GridStore | None
    window_history: list[dict[int, float]]
    checkpoint_checksum: str | None
    status: str = "running"

    def to_json(self) -> dict:
        return {
            "artifact_version": ARTIFACT_VERSION,
            "mode": self.mode,
            "config": self.config.to_json(),
            "stage": self.stage,
            "cycles_done": self.cycles_done,
            "grid": None if self.grid is None else self.grid.to_json(),
            "window_history": [{str(t): v for t, v in d.items()} for d in self.window_history],
            "checkpoint_checksum": self.checkpoint_checksum,
            "status": self.status,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunState":
        if data.get("artifact_version") != ARTIFACT_VERSION:
            raise protocol.ProtocolError(
                f"run state written by version {data.get('artifact_version')!r}, "
                f"this is {ARTIFACT_VERSION}"
            )
        grid = data["grid"]
        return cls(
            config=SchedulerConfig.from_json(data["config"]),
            mode=data["mode"],
            stage=data["stage"],
            cycles_done=data["cycles_done"],
            grid=None if grid is None else GridStore.from_json(grid),
            window_history=[{int(t): v for t, v in d.items()} for d in data["window_history"]],
            checkpoint_checksum=data["checkpoint_checksum"],
            status=data["status"],
        )


def save_state(run_dir: Path, state: RunState) -> None:
    record = protocol._sealed({"schema_version": protocol.SCHEMA_VERSION, **state.to_json()})
    protocol.atomic_write(run_dir / protocol.STATE_FILE, protocol.canonical_json(record) + "\n")


def load_state(run_dir: Path) -> RunState:
    path = Path(run_dir) / protocol.STATE_FILE
    with open(path) as f:
        record = json.load(f)
    protocol._check_version(record, path)
    protocol._verify_seal(record, path)
    return RunState.from_json(record)


# ---------------------------------------------------------------------------
# The scheduling loop

class ScheduleRunner:
    """Owns a run directory and executes a dynamic or fixed curriculum run."""

    def __init__(
        self,
        config: SchedulerConfig,
        dataset: Dataset,
        trainer: EmbeddedTrainer | ExternalTrainer,
        run_dir: str | Path,
        lexicon: TypeLexicon | None = None,
    ):
        self.config = config
        self.dataset = dataset
        self.trainer = trainer
        self.run_dir = Path(run_dir)
        self.lexicon = lexicon
        self.partition = partition_by_type(dataset.samples)
        self.metrics = MetricsLog(self.run_dir / "metrics.csv")
        self._dataset_ids = np.sort(np.array([s.sample_id for s in dataset.samples]))
        self._mode = "dynamic"

    # -- helpers ----------------------------------------------------------

    def _validate_report(self, report: LossReport, stage: int, cycle: int) -> None:
        if len(report) != self.partition.total_count or not np.array_equal(
            np.sort(report.sample_ids), self._dataset_ids
        ):
            raise ScheduleError(
                f"stage {stage} cycle {cycle}: loss report must cover every sample exactly once"
            )
        if report.iteration != stage or report.cycle != cycle:
            raise ScheduleError(
                f"stage {stage} cycle {cycle}: report is labeled ({report.iteration}, {report.cycle})"
            )

    def _checkpoint_path(self) -> Path:
        return self.run_dir / "checkpoints" / "current.npz"

    def _run_stage_cycles(
        self,
        stage: int,
        cycles: int,
        sample_ids: list[int],
        grid: GridStore | None,
        window: ConsolidationWindow,
        start_cycle: int = 1,
        prev_hists: dict | None = None,
    ) -> tuple[GridStore, LossReport]:
        """Run (or replay) one stage's cycles, maintaining the divergence window."""
        if not sample_ids:
            raise ScheduleError(f"stage {stage}: empty curriculum")
        last_report = None
        for cycle in range(start_cycle, cycles + 1):
            t0 = time.perf_counter()
            report = self.trainer.run_cycle(self.run_dir, stage, cycle, sample_ids)
            self._validate_report(report, stage, cycle)
            if grid is None:
                grid = GridStore.fit(report, self.config.num_bins, self.config.per_task_grid)
            hists = grid.histograms(report)
            if prev_hists is not None:
                window.push(divergence_vector(prev_hists, hists))
            prev_hists = hists
            last_report = report
            wall_ms = (time.perf_counter() - t0) * 1e3
            self.metrics.append(stage, cycle, self.trainer.evaluations(), report.mean_loss(), wall_ms)
            self._save_progress(stage, cycle, grid, window)
        return grid, last_report

    def _save_progress(self, stage: int, cycles_done: int, grid: GridStore | None, window: ConsolidationWindow) -> None:
        checksum = self.trainer.save_checkpoint(self._checkpoint_path())
        save_state(self.run_dir, RunState(
            config=self.config,
            mode=self._mode,
            stage=stage,
            cycles_done=cycles_done,
            grid=grid,
            window_history=window.history,
            checkpoint_checksum=checksum,
        ))

    def _difficulty(self, window: ConsolidationWindow, last_report: LossReport) -> DifficultyVector:
        if self.config.difficulty_mode == "mean":
            return mean_difficulty(last_report)
        return window.consolidate()

    def _stage_cycles(self, stage: int) -> int:
        return self.config.warmup_cycles if stage == 0 else self.config.cycles

    def _stage_samples(self, stage: int) -> list[int]:
        manifest = protocol.read_manifest(protocol.manifest_path(self.run_dir, stage))
        return manifest["samples"]

    # -- dynamic ----------------------------------------------------------

    def run_dynamic(self) -> dict:
        """Warm-up, then `stages` planned curriculum stages; returns the run summary."""
        cfg = self.config
        warmup_tasks = sorted(self.partition.tasks)
        warmup_samples = [sid for t in warmup_tasks for sid in self.partition.tasks[t]]
        warmup = CurriculumStage(0, 1.0, warmup_tasks, warmup_samples, None)
        protocol.write_manifest(self.run_dir, warmup.manifest(cfg.direction, cfg.warmup_cycles, phase="warmup"))

        grid: GridStore | None = None
        window = ConsolidationWindow(cfg.cycles, cfg.alphas)
        grid, last_report = self._run_stage_cycles(0, cfg.warmup_cycles, warmup_samples, grid, window)

        for stage in range(1, cfg.stages + 1):
            difficulty = self._difficulty(window, last_report)
            fraction = cfg.pacing.fraction(stage - 1)
            plan = plan_stage(difficulty, self.partition, fraction, cfg.direction, stage)
            protocol.write_manifest(self.run_dir, plan.manifest(cfg.direction, cfg.cycles))
            (self.run_dir / "difficulty").mkdir(exist_ok=True)
            protocol.atomic_write(
                self.run_dir / "difficulty" / f"stage_{stage:03d}.json",
                protocol.canonical_json(difficulty.to_json(stage)) + "\n",
            )
            window.reset()
            grid, last_report = self._run_stage_cycles(
                stage, cfg.cycles, plan.included_sample_ids, grid, window
            )
        return self._finish()

    # -- fixed ------------------------------------------------------------

    def run_fixed(self) -> dict:
        """Coarse-group stages under discrete pacing; no difficulty scoring."""
        if self.lexicon is None:
            raise ScheduleError("fixed curriculum requires a lexicon")
        self._mode = "fixed"
        cfg = self.config
        pacing = cfg.pacing if cfg.pacing.mode == "discrete" else PacingConfig(mode="discrete")
        stages = plan_fixed_stages(self.partition, self.lexicon, pacing)
        grid: GridStore | None = None
        window = ConsolidationWindow(cfg.cycles, cfg.alphas)
        for plan in stages:
            protocol.write_manifest(self.run_dir, plan.manifest("fixed", cfg.cycles))
            window.reset()
            grid, _ = self._run_stage_cycles(plan.stage_index, cfg.cycles, plan.included_sample_ids, grid, window)
        return self._finish(num_stages=len(stages))

    def _finish(self, num_stages: int | None = None) -> dict:
        summary = {
            "stages": self.config.stages if num_stages is None else num_stages,
            "cycles": self.config.cycles,
            "seed": self.config.seed,
            "metrics_rows": self.metrics.rows_written,
        }
        state = load_state(self.run_dir)
        state.status = "complete"
        save_state(self.run_dir, state)
        protocol.write_done(self.run_dir, summary)
        return summary

    # -- resume -----------------------------------------------------------

    def resume(self) -> dict:
        """Continue an interrupted run at the recorded stage/cycle; a completed run is a no-op."""
        if protocol.run_is_done(self.run_dir):
            return {"status": "complete", "resumed": False}
        state = load_state(self.run_dir)
        return self._resume_fixed(state) if state.mode == "fixed" else self._resume_dynamic(state)

    def _resume_dynamic(self, state: RunState) -> dict:
        if state.config.to_json() != self.config.to_json():
            raise protocol.ProtocolError("run state was written with a different configuration")
        cfg = self.config
        if state.checkpoint_checksum is not None:
            self.trainer.load_checkpoint(self._checkpoint_path(), state.checkpoint_checksum)
        grid = state.grid
        window = ConsolidationWindow(cfg.cycles, cfg.alphas)
        window.restore(state.window_history)

        stage, cycles_done = state.stage, state.cycles_done
        last = self.trainer.rescore(self.run_dir, stage, cycles_done)
        if cycles_done < self._stage_cycles(stage):
            grid, last_report = self._run_stage_cycles(
                stage, self._stage_cycles(stage), self._stage_samples(stage),
                grid, window, start_cycle=cycles_done + 1, prev_hists=grid.histograms(last),
            )
        else:
            last_report = last

        for next_stage in range(stage + 1, cfg.stages + 1):
            difficulty = self._difficulty(window, last_report)
            fraction = cfg.pacing.fraction(next_stage - 1)
            plan = plan_stage(difficulty, self.partition, fraction, cfg.direction, next_stage)
            protocol.write_manifest(self.run_dir, plan.manifest(cfg.direction, cfg.cycles))
            (self.run_dir / "difficulty").mkdir(exist_ok=True)
            protocol.atomic_write(
                self.run_dir / "difficulty" / f"stage_{next_stage:03d}.json",
                protocol.canonical_json(difficulty.to_json(next_stage)) + "\n",
            )
            window.reset()
            grid, last_report = self._run_stage_cycles(
                next_stage, cfg.cycles, plan.included_sample_ids, grid, window
            )
        return self._finish()

    def _resume_fixed(self, state: RunState) -> dict:
        if state.config.to_json() != self.config.to_json():
            raise protocol.ProtocolError("run state was written with a different configuration")
        if self.lexicon is None:
            raise ScheduleError("fixed curriculum requires a lexicon")
        self._mode = "fixed"
        cfg = self.config
        if state.checkpoint_checksum is not None:
            self.trainer.load_checkpoint(self._checkpoint_path(), state.checkpoint_checksum)
        pacing = cfg.pacing if cfg.pacing.mode == "discrete" else PacingConfig(mode="discrete")
        stages = plan_fixed_stages(self.partition, self.lexicon, pacing)
        grid = state.grid
        window = ConsolidationWindow(cfg.cycles, cfg.alphas)
        window.restore(state.window_history)
        for plan in stages:
            if plan.stage_index < state.stage:
                continue
            start = state.cycles_done + 1 if plan.stage_index == state.stage else 1
            if start > cfg.cycles:
                continue
            prev = None
            if start > 1:
                last = self.trainer.rescore(self.run_dir, plan.stage_index, start - 1)
                prev = grid.histograms(last)
            else:
                protocol.write_manifest(self.run_dir, plan.manifest("fixed", cfg.cycles))
                window.reset()
            grid, _ = self._run_stage_cycles(
                plan.stage_index, cfg.cycles, plan.included_sample_ids, grid, window,
                start_cycle=start, prev_hists=prev,
            )
        return self._finish(num_stages=len(stages))
