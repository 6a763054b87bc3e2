"""Synthetic prior-shift benchmark generator.

Each task draws labels from a skewed prior over a shared label space; the
majority label rotates with the task id, mirroring per-question-type answer
priors. Features concatenate a task one-hot, a label-noisy informative block,
and a single spurious flag correlated with majority-ness on the training
distribution. The OOD split reverses the per-task prior and breaks the
spurious correlation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, Sample, ValidationError


@dataclass(frozen=True)
class SyntheticSpec:
    num_tasks: int = 8
    samples_per_task: int = 2000
    labels_per_task: int = 3
    bias_strength: float = 0.9
    prior_shift: str = "reversed"  # "none" | "reversed"
    seed: int = 0
    feature_dim: int | None = None  # default num_tasks + labels_per_task + 1
    # Shortcut-channel gain: scale of the task one-hot and spurious flag.
    # Small values make prior memorization slow relative to the informative
    # block, which is what gives prolonged full-data training room to overfit
    # the prior.
    shortcut_scale: float = 0.2
    # Label-flip noise of the informative block: the first half of the tasks
    # get `info_noise[0]`, the rest `info_noise[1]`.
    info_noise: tuple[float, float] = (0.05, 0.45)
    info_jitter: float = 0.2

    def __post_init__(self):
        if self.num_tasks < 2:
            raise ValidationError("num_tasks must be >= 2")
        if self.labels_per_task < 2:
            raise ValidationError("labels_per_task must be >= 2")
        if not 0.0 <= self.bias_strength <= 1.0:
            raise ValidationError("bias_strength must lie in [0, 1]")
        if self.prior_shift not in ("none", "reversed"):
            raise ValidationError(f"unknown prior_shift {self.prior_shift!r}")
        if self.feature_dim is not None and self.feature_dim < self.base_dim:
            raise ValidationError(f"feature_dim must be >= {self.base_dim}")

    @property
    def base_dim(self) -> int:
        return self.num_tasks + self.labels_per_task + 1

    @property
    def dim(self) -> int:
        return self.feature_dim if self.feature_dim is not None else self.base_dim

    def majority_label(self, task_id: int) -> int:
        return task_id % self.labels_per_task

    def ood_majority_label(self, task_id: int) -> int:
        return (task_id % self.labels_per_task + 1) % self.labels_per_task

    def task_info_noise(self, task_id: int) -> float:
        lo, hi = self.info_noise
        return lo if task_id < (self.num_tasks + 1) // 2 else hi

    def to_json(self) -> dict:
        return {
            "num_tasks": self.num_tasks,
            "samples_per_task": self.samples_per_task,
            "labels_per_task": self.labels_per_task,
            "bias_strength": self.bias_strength,
            "prior_shift": self.prior_shift,
            "seed": self.seed,
            "feature_dim": self.feature_dim,
            "shortcut_scale": self.shortcut_scale,
            "info_noise": list(self.info_noise),
            "info_jitter": self.info_jitter,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SyntheticSpec":
        return cls(**{**data, "info_noise": tuple(data["info_noise"])})


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Generate (train, test_id, test_ood) splits, deterministic in spec.seed.

    Train and test_id share the generative process (skewed prior, spurious
    correlation on); test_ood uses the reversed prior when prior_shift is
    "reversed" and draws the spurious flag independently of the label.
    """
    train = _generate_split(spec, split="train", id_base=0)
    test_id = _generate_split(spec, split="test_id", id_base=10_000_000)
    test_ood = _generate_split(spec, split="test_ood", id_base=20_000_000)
    return train, test_id, test_ood


def _split_rng(spec: SyntheticSpec, split: str, task_id: int) -> np.random.Generator:
    tag = {"train": 0, "test_id": 1, "test_ood": 2}[split]
    return np.random.default_rng([spec.seed, tag, task_id])


def _generate_split(spec: SyntheticSpec, split: str, id_base: int) -> Dataset:
    L = spec.labels_per_task
    T = spec.num_tasks
    n = spec.samples_per_task
    shifted = split == "test_ood" and spec.prior_shift == "reversed"
    spurious_on = split != "test_ood"
    samples: list[Sample] = []
    for t in range(T):
        rng = _split_rng(spec, split, t)
        maj = spec.ood_majority_label(t) if shifted else spec.majority_label(t)
        prior = np.full(L, (1.0 - spec.bias_strength) / (L - 1))
        prior[maj] = spec.bias_strength
        y = rng.choice(L, size=n, p=prior)

        q = spec.task_info_noise(t)
        flip = rng.random(n) < q
        shown = y.copy()
        if L > 1:
            offset = 1 + rng.integers(0, L - 1, size=n)
            shown[flip] = (y[flip] + offset[flip]) % L
        info = np.zeros((n, L))
        info[np.arange(n), shown] = 1.0
        info += rng.normal(0.0, spec.info_jitter, size=info.shape)

        onehot = np.zeros((n, T))
        onehot[:, t] = spec.shortcut_scale

        train_maj = spec.majority_label(t)
        is_majority = (y == train_maj).astype(np.float64)
        if spurious_on:
            agree = rng.random(n) < spec.bias_strength
            flag = np.where(agree, is_majority, 1.0 - is_majority)
        else:
            flag = (rng.random(n) < 0.5).astype(np.float64)
        flag = flag * spec.shortcut_scale

        X = np.hstack([onehot, info, flag[:, None]])
        extra = spec.dim - spec.base_dim
        if extra:
            X = np.hstack([X, rng.normal(0.0, 1.0, size=(n, extra))])
        for i in range(n):
            samples.append(Sample(
                sample_id=id_base + t * n + i,
                features=X[i],
                answer=(int(y[i]),),
                task_type_id=t,
            ))
    return Dataset(samples, num_labels=L, feature_dim=spec.dim)
