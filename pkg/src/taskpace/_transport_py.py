"""Pure-numpy fallback for the 1D transport kernel (same contract as the compiled one)."""

from __future__ import annotations

import numpy as np


def monotone_cost(a: np.ndarray, b: np.ndarray, centers: np.ndarray) -> float:
    """Monotone-coupling transport cost, squared distance between bin centers.

    Vectorized over the merged quantile levels of the two CDFs: each level
    segment moves its mass between the bins the two inverse CDFs sit in.
    """
    ca = np.cumsum(a)
    cb = np.cumsum(b)
    levels = np.union1d(ca, cb)
    prev = np.concatenate(([0.0], levels[:-1]))
    seg = levels - prev
    mid = 0.5 * (levels + prev)
    ia = np.minimum(np.searchsorted(ca, mid, side="left"), len(a) - 1)
    ib = np.minimum(np.searchsorted(cb, mid, side="left"), len(b) - 1)
    d = centers[ia] - centers[ib]
    return float(np.sum(seg * d * d))
