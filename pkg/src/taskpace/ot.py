"""Exact 1D optimal transport between same-grid loss histograms.

In one dimension with a convex ground cost the monotone coupling is optimal,
so the divergence is computed by a single merge walk instead of a linear
program. The hot kernel is compiled (Cython) when the extension built,
otherwise a vectorized numpy fallback is used; set TASKPACE_NO_EXT=1 to force
the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .histograms import GridMismatchError, ScoreHistogram

if os.environ.get("TASKPACE_NO_EXT"):
    from ._transport_py import monotone_cost as _monotone_cost

    BACKEND = "fallback"
else:
    try:
        from ._transport_c import monotone_cost as _monotone_cost

        BACKEND = "compiled"
    except ImportError:  # extension not built
        from ._transport_py import monotone_cost as _monotone_cost

        BACKEND = "fallback"


@dataclass(frozen=True)
class TransportPlan:
    """Monotone coupling between two histograms: (source_bin, target_bin, mass) triples."""

    couplings: list[tuple[int, int, float]]
    cost: float

    def source_marginal(self, num_bins: int) -> np.ndarray:
        out = np.zeros(num_bins)
        for i, _, m in self.couplings:
            out[i] += m
        return out

    def target_marginal(self, num_bins: int) -> np.ndarray:
        out = np.zeros(num_bins)
        for _, j, m in self.couplings:
            out[j] += m
        return out


def _check_grids(a: ScoreHistogram, b: ScoreHistogram) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"histograms use different grids: {a.grid} vs {b.grid}")


def ot_divergence(a: ScoreHistogram, b: ScoreHistogram) -> float:
    """Minimum expected squared center distance to move mass of `a` onto `b`."""
    _check_grids(a, b)
    centers = a.grid.centers()
    return float(_monotone_cost(
        np.ascontiguousarray(a.mass, dtype=np.float64),
        np.ascontiguousarray(b.mass, dtype=np.float64),
        np.ascontiguousarray(centers, dtype=np.float64),
    ))


def transport_plan(a: ScoreHistogram, b: ScoreHistogram) -> TransportPlan:
    """The monotone coupling itself, for inspection; cost matches ot_divergence."""
    _check_grids(a, b)
    centers = a.grid.centers()
    m = a.grid.num_bins
    couplings: list[tuple[int, int, float]] = []
    cost = 0.0
    i = j = 0
    ra, rb = float(a.mass[0]), float(b.mass[0])
    while i < m and j < m:
        moved = min(ra, rb)
        if moved > 0.0:
            couplings.append((i, j, moved))
            d = centers[i] - centers[j]
            cost += moved * d * d
        ra -= moved
        rb -= moved
        if ra <= 0.0:
            i += 1
            if i < m:
                ra = float(a.mass[i])
        if rb <= 0.0:
            j += 1
            if j < m:
                rb = float(b.mass[j])
    return TransportPlan(couplings, cost)
