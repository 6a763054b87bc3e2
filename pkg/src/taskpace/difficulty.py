"""Per-task difficulty from loss distributions.

A scoring event covers every sample of the full training set. Each task's
losses become a fixed-grid histogram; the divergence between consecutive
events' histograms, consolidated over a window of cycles, is the task's
difficulty. The mean-loss variant drops both the distribution and the window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .histograms import HistogramGrid, ScoreHistogram, build_histogram
from .ot import ot_divergence

DEFAULT_ALPHAS = (0.1, 0.1, 0.3, 0.5)

# Window weightings studied for B = 5; "increasing" favors the latest cycles.
ALPHA_PRESETS = {
    "increasing": (0.1, 0.1, 0.3, 0.5),
    "decreasing": (0.5, 0.3, 0.1, 0.1),
    "uniform": (0.25, 0.25, 0.25, 0.25),
}


class WindowError(ValueError):
    """Raised when a consolidation window is used before it is complete."""


@dataclass
class LossReport:
    """Per-sample losses from one scoring event (stage `iteration`, cycle `cycle`)."""

    iteration: int
    cycle: int
    sample_ids: np.ndarray
    task_ids: np.ndarray
    losses: np.ndarray

    def __post_init__(self):
        self.sample_ids = np.asarray(self.sample_ids, dtype=np.int64)
        self.task_ids = np.asarray(self.task_ids, dtype=np.int64)
        self.losses = np.asarray(self.losses, dtype=np.float64)
        n = len(self.sample_ids)
        if len(self.task_ids) != n or len(self.losses) != n:
            raise ValueError("sample_ids, task_ids and losses must have equal length")
        if n == 0:
            raise ValueError("loss report is empty")
        if not np.all(np.isfinite(self.losses)) or np.any(self.losses < 0):
            raise ValueError("losses must be finite and nonnegative")

    def __len__(self) -> int:
        return len(self.sample_ids)

    def mean_loss(self) -> float:
        return float(self.losses.mean())


@dataclass(frozen=True)
class DifficultyVector:
    """Consolidated per-task difficulty driving the curriculum sort."""

    scores: dict[int, float]

    def to_json(self, iteration: int) -> dict:
        return {"iteration": iteration, "scores": {str(t): s for t, s in sorted(self.scores.items())}}


def task_histograms(report: LossReport, grid: HistogramGrid) -> dict[int, ScoreHistogram]:
    """One normalized histogram per task present in the report."""
    out: dict[int, ScoreHistogram] = {}
    for t in np.unique(report.task_ids):
        out[int(t)] = build_histogram(report.losses[report.task_ids == t], grid)
    return out


def divergence_vector(
    prev: dict[int, ScoreHistogram], curr: dict[int, ScoreHistogram]
) -> dict[int, float]:
    """Per-task transport divergence between two scoring events."""
    if set(prev) != set(curr):
        missing = sorted(set(prev) ^ set(curr))
        raise ValueError(f"task sets differ between scoring events; mismatched tasks: {missing}")
    return {t: ot_divergence(curr[t], prev[t]) for t in sorted(curr)}


@dataclass
class ConsolidationWindow:
    """Rolling store of the divergence vectors of one stage's cycles (b = 2..B)."""

    cycles: int = 5  # B
    alphas: tuple[float, ...] = DEFAULT_ALPHAS

    def __post_init__(self):
        if self.cycles < 2:
            raise ValueError("consolidation needs at least 2 cycles")
        if len(self.alphas) != self.cycles - 1:
            raise ValueError(f"need {self.cycles - 1} alpha weights for {self.cycles} cycles")
        if any(a < 0 for a in self.alphas):
            raise ValueError("alpha weights must be nonnegative")
        self._history: list[dict[int, float]] = []

    def push(self, divergences: dict[int, float]) -> None:
        self._history.append(dict(divergences))
        if len(self._history) > self.cycles - 1:
            self._history.pop(0)

    def reset(self) -> None:
        self._history = []

    @property
    def history(self) -> list[dict[int, float]]:
        return [dict(d) for d in self._history]

    def restore(self, history: list[dict[int, float]]) -> None:
        if len(history) > self.cycles - 1:
            raise ValueError("history longer than the window")
        self._history = [dict(d) for d in history]

    @property
    def complete(self) -> bool:
        return len(self._history) == self.cycles - 1

    def consolidate(self) -> DifficultyVector:
        """Weighted sum of the stored vectors: score_t = sum_b alpha_b * phi_t,b."""
        if not self.complete:
            raise WindowError(
                f"window incomplete: have {len(self._history)} of {self.cycles - 1} divergence vectors"
            )
        tasks = set(self._history[0])
        scores = {t: 0.0 for t in tasks}
        for alpha, vec in zip(self.alphas, self._history):
            if set(vec) != tasks:
                raise ValueError("divergence vectors in the window cover different tasks")
            for t in tasks:
                scores[t] += alpha * vec[t]
        return DifficultyVector(scores)


def consolidate(window: ConsolidationWindow) -> DifficultyVector:
    return window.consolidate()


def mean_difficulty(report: LossReport) -> DifficultyVector:
    """Instantaneous variant: per-task mean loss of the latest scoring event only."""
    scores: dict[int, float] = {}
    for t in np.unique(report.task_ids):
        scores[int(t)] = float(report.losses[report.task_ids == t].mean())
    return DifficultyVector(scores)
