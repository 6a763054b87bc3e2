"""Pacing: the fraction of training data exposed at each curriculum stage."""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_LAMBDA0 = 0.1
DEFAULT_LAMBDA_GROW = 4.5

# Default discrete schedule: cumulative share of the 65 question types across
# the four coarse groups (32, 29, 1, 3 types).
DEFAULT_DISCRETE = (32 / 65, 61 / 65, 62 / 65, 1.0)


@dataclass(frozen=True)
class PacingConfig:
    mode: str = "incremental"  # "incremental" | "decremental" | "discrete"
    lambda0: float = DEFAULT_LAMBDA0
    lambda_grow: float = DEFAULT_LAMBDA_GROW
    discrete_fractions: tuple[float, ...] = DEFAULT_DISCRETE

    def __post_init__(self):
        if self.mode not in ("incremental", "decremental", "discrete"):
            raise ValueError(f"unknown pacing mode {self.mode!r}")
        if self.mode in ("incremental", "decremental"):
            if not 0.0 < self.lambda0 <= 1.0:
                raise ValueError("lambda0 must lie in (0, 1]")
            if self.lambda_grow <= 0:
                raise ValueError("lambda_grow must be positive")
        else:
            fr = self.discrete_fractions
            if not fr or fr[-1] != 1.0:
                raise ValueError("discrete fractions must end at 1.0")
            if any(not 0.0 < f <= 1.0 for f in fr) or any(b <= a for a, b in zip(fr, fr[1:])):
                raise ValueError("discrete fractions must be ascending within (0, 1]")

    def fraction(self, stage_index: int) -> float:
        if stage_index < 0:
            raise ValueError("stage index must be >= 0")
        if self.mode == "incremental":
            return pace_incremental(stage_index, self)
        if self.mode == "decremental":
            return pace_decremental(stage_index, self)
        return pace_discrete(stage_index, self)


def pace_incremental(stage_index: int, cfg: PacingConfig) -> float:
    """min(1, lambda0 + (1 - lambda0)/lambda_grow * k), zero-based k.

    Zero-based evaluation reproduces the published step schedule
    [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] at the default parameters.
    """
    return min(1.0, cfg.lambda0 + (1.0 - cfg.lambda0) / cfg.lambda_grow * stage_index)


def pace_decremental(stage_index: int, cfg: PacingConfig) -> float:
    """max(0, 1 - (1 - lambda0)/lambda_grow * k)."""
    return max(0.0, 1.0 - (1.0 - cfg.lambda0) / cfg.lambda_grow * stage_index)


def pace_discrete(stage_index: int, cfg: PacingConfig) -> float:
    """Cumulative fraction through group `stage_index` of the fixed curriculum."""
    if stage_index >= len(cfg.discrete_fractions):
        raise ValueError(
            f"stage {stage_index} out of range for {len(cfg.discrete_fractions)} discrete stages"
        )
    return cfg.discrete_fractions[stage_index]


@dataclass(frozen=True)
class PacingPlan:
    """The realized fraction schedule of a run, one entry per stage."""

    fractions: tuple[float, ...]

    @classmethod
    def build(cls, cfg: PacingConfig, num_stages: int) -> "PacingPlan":
        return cls(tuple(cfg.fraction(k) for k in range(num_stages)))
