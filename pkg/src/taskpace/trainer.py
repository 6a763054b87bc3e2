"""Embedded desk-scale trainer: a linear classifier under per-class sigmoid cross-entropy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .difficulty import LossReport
from .lexicon import GROUP_ORDER, CoarseGroup, TypeLexicon


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 64
    passes_per_cycle: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ToyModel:
    """Linear scores over the label space: logits = x @ weights + bias."""

    weights: np.ndarray  # (feature_dim, num_labels)
    bias: np.ndarray  # (num_labels,)

    @classmethod
    def zeros(cls, feature_dim: int, num_labels: int) -> "ToyModel":
        return cls(np.zeros((feature_dim, num_labels)), np.zeros(num_labels))

    def copy(self) -> "ToyModel":
        return ToyModel(self.weights.copy(), self.bias.copy())

    def logits(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.logits(features).argmax(axis=1)


@dataclass(frozen=True)
class EvalResult:
    split: str
    overall: float
    group_accuracy: dict[CoarseGroup, float]
    group_counts: dict[CoarseGroup, int]
    vqa_score: float | None = None


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def sample_losses(model: ToyModel, features: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-sample loss: sigmoid cross-entropy against the multi-hot target, averaged over classes."""
    z = model.logits(features)
    # log(1 + e^-|z|) + max(z, 0) - z*y is the stable per-class cross-entropy.
    ce = np.maximum(z, 0.0) - z * targets + np.log1p(np.exp(-np.abs(z)))
    return ce.mean(axis=1)


def loss_gradient(
    model: ToyModel, features: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Batch-mean gradient of the per-class-mean sigmoid cross-entropy."""
    z = model.logits(features)
    g = (_sigmoid(z) - targets) / targets.shape[1]
    return features.T @ g / len(features), g.mean(axis=0)


def _pass_rng(cfg: TrainConfig, pass_key: tuple[int, ...]) -> np.random.Generator:
    # Shuffle order is a pure function of the config seed and the pass key,
    # so resumed runs replay identical batches.
    return np.random.default_rng([cfg.seed, *pass_key])


def train_cycle(
    model: ToyModel,
    features: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    pass_key: tuple[int, ...] = (0,),
) -> ToyModel:
    """One training cycle of shuffled mini-batch gradient descent; returns the updated model."""
    if len(features) == 0:
        raise ValueError("cannot train on an empty curriculum")
    model = model.copy()
    n = len(features)
    for p in range(cfg.passes_per_cycle):
        order = _pass_rng(cfg, (*pass_key, p)).permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            gw, gb = loss_gradient(model, features[idx], targets[idx])
            model.weights -= cfg.learning_rate * gw
            model.bias -= cfg.learning_rate * gb
    if not np.all(np.isfinite(model.weights)) or not np.all(np.isfinite(model.bias)):
        raise FloatingPointError(
            "training diverged to non-finite weights; lower the learning rate"
        )
    return model


def score_all(model: ToyModel, dataset: Dataset, iteration: int, cycle: int) -> LossReport:
    """Loss of every sample in the full dataset, regardless of the current curriculum."""
    feats = dataset.features
    if feats.shape[1] != model.weights.shape[0]:
        raise ValueError(
            f"feature dim {feats.shape[1]} does not match model dim {model.weights.shape[0]}"
        )
    losses = sample_losses(model, feats, dataset.targets)
    return LossReport(iteration, cycle, dataset.sample_ids, dataset.task_ids, losses)


def evaluate(model: ToyModel, dataset: Dataset, split: str, lexicon: TypeLexicon | None = None) -> EvalResult:
    """Top-1 accuracy overall and per coarse group, plus the clamped annotator score when counts exist.

    A prediction is correct when it is one of the sample's positive labels.
    Task ids outside the lexicon (or with no lexicon at all) count under the
    "other" group.
    """
    preds = model.predict(dataset.features)
    correct = dataset.targets[np.arange(len(preds)), preds] > 0.0

    group_index = {g: k for k, g in enumerate(GROUP_ORDER)}
    other = group_index[CoarseGroup.OTHER]
    task_ids = dataset.task_ids
    groups = np.full(len(preds), other, dtype=np.int64)
    if lexicon is not None:
        lut = np.full(max(len(lexicon), int(task_ids.max()) + 1), other, dtype=np.int64)
        for e in lexicon.entries:
            lut[e.type_id] = group_index[e.group]
        groups = lut[task_ids]
    group_accuracy: dict[CoarseGroup, float] = {}
    group_counts: dict[CoarseGroup, int] = {}
    for g, k in group_index.items():
        mask = groups == k
        group_counts[g] = int(mask.sum())
        group_accuracy[g] = float(correct[mask].mean()) if mask.any() else 0.0

    vqa = None
    scored = [(p, s) for p, s in zip(preds, dataset.samples) if s.answer_counts is not None]
    if scored:
        vals = [min(s.answer_counts.get(int(p), 0) / 3.0, 1.0) for p, s in scored]
        vqa = float(np.mean(vals))
    return EvalResult(split, float(correct.mean()), group_accuracy, group_counts, vqa)
