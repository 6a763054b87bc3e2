"""Fixed-grid loss histograms shared by all tasks in a run."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_BINS = 100
MIN_GRID_MAX = 1e-6


class GridMismatchError(ValueError):
    """Raised when two histograms built on different grids are compared."""


@dataclass(frozen=True)
class HistogramGrid:
    """Uniform bins on [0, upper]; the last bin is closed, the rest right-open."""

    num_bins: int = DEFAULT_BINS
    upper: float = 1.0

    def __post_init__(self):
        if self.num_bins < 2:
            raise ValueError("num_bins must be >= 2")
        if not self.upper > 0:
            raise ValueError("grid upper edge must be positive")

    @property
    def width(self) -> float:
        return self.upper / self.num_bins

    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.upper, self.num_bins + 1)

    def centers(self) -> np.ndarray:
        return (np.arange(self.num_bins) + 0.5) * self.width


@dataclass(frozen=True)
class ScoreHistogram:
    """Normalized mass over a grid; total mass is 1."""

    grid: HistogramGrid
    mass: np.ndarray

    def __post_init__(self):
        if self.mass.shape != (self.grid.num_bins,):
            raise ValueError("mass length must equal the grid bin count")
        if np.any(self.mass < 0):
            raise ValueError("histogram mass must be nonnegative")
        if abs(float(self.mass.sum()) - 1.0) > 1e-12:
            raise ValueError("histogram mass must sum to 1")


def fit_grid(losses: np.ndarray, num_bins: int = DEFAULT_BINS) -> HistogramGrid:
    """Fix the grid from the first scoring event: upper edge = max observed loss.

    An all-zero first event degenerates to a tiny positive upper edge so later
    histograms still have a valid grid.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size == 0:
        raise ValueError("cannot fit a grid to an empty loss set")
    upper = float(losses.max())
    if upper <= 0.0:
        upper = MIN_GRID_MAX
    return HistogramGrid(num_bins=num_bins, upper=upper)


def build_histogram(losses: np.ndarray, grid: HistogramGrid) -> ScoreHistogram:
    """Bin losses on the shared grid; values beyond the grid clamp into the last bin."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size == 0:
        raise ValueError("cannot build a histogram for an empty task")
    clipped = np.clip(losses, 0.0, grid.upper)
    counts, _ = np.histogram(clipped, bins=grid.num_bins, range=(0.0, grid.upper))
    return ScoreHistogram(grid, counts / counts.sum())
