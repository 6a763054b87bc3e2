"""Samples, task partitions, and dataset file ingestion."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .lexicon import GROUP_ORDER, CoarseGroup, TypeLexicon


class ValidationError(ValueError):
    """Raised when an input file or record violates its schema."""


@dataclass
class Sample:
    """One labeled training item.

    `features` stands in for the encoded question-image pair; `answer` holds
    the positive label indices (multi-hot; one-hot in synthetic data);
    `answer_counts` optionally maps a label index to its annotator count.
    """

    sample_id: int
    features: np.ndarray
    answer: tuple[int, ...]
    task_type_id: int
    answer_counts: dict[int, int] | None = None

    def __post_init__(self):
        if len(self.answer) == 0:
            raise ValidationError(f"sample {self.sample_id}: answer must have at least one positive entry")


@dataclass
class Dataset:
    """A list of samples plus the dimensions inferred from (or fixed by) its source."""

    samples: list[Sample]
    num_labels: int
    feature_dim: int

    def __len__(self) -> int:
        return len(self.samples)

    @cached_property
    def features(self) -> np.ndarray:
        return np.stack([s.features for s in self.samples])

    @cached_property
    def targets(self) -> np.ndarray:
        y = np.zeros((len(self.samples), self.num_labels))
        for i, s in enumerate(self.samples):
            y[i, list(s.answer)] = 1.0
        return y

    @cached_property
    def task_ids(self) -> np.ndarray:
        return np.array([s.task_type_id for s in self.samples], dtype=np.int64)

    @cached_property
    def sample_ids(self) -> np.ndarray:
        return np.array([s.sample_id for s in self.samples], dtype=np.int64)

    @classmethod
    def from_samples(cls, samples: list[Sample]) -> "Dataset":
        if not samples:
            raise ValidationError("no samples")
        num_labels = max(max(s.answer) for s in samples) + 1
        return cls(samples, num_labels, len(samples[0].features))


@dataclass
class TaskPartition:
    """Disjoint grouping of sample ids keyed by task type id."""

    tasks: dict[int, list[int]]
    total_count: int

    def task_sizes(self) -> dict[int, int]:
        return {t: len(ids) for t, ids in self.tasks.items()}

    def to_json(self) -> dict:
        return {
            "total_count": self.total_count,
            "tasks": {str(t): ids for t, ids in sorted(self.tasks.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "TaskPartition":
        tasks = {int(t): list(ids) for t, ids in data["tasks"].items()}
        return cls(tasks, data["total_count"])


def partition_by_type(samples: list[Sample]) -> TaskPartition:
    """Group samples by task type id. Empty tasks are absent from the map."""
    seen: set[int] = set()
    tasks: dict[int, list[int]] = {}
    for s in samples:
        if s.sample_id in seen:
            raise ValidationError(f"duplicate sample_id {s.sample_id}")
        seen.add(s.sample_id)
        tasks.setdefault(s.task_type_id, []).append(s.sample_id)
    return TaskPartition(tasks, len(samples))


def coarse_partition(partition: TaskPartition, lexicon: TypeLexicon) -> dict[CoarseGroup, list[int]]:
    """Map each coarse group to its task type ids, in the group order wh, yesno, other, number."""
    for t in partition.tasks:
        if not 0 <= t < len(lexicon):
            raise ValidationError(f"task id {t} not present in lexicon of size {len(lexicon)}")
    out: dict[CoarseGroup, list[int]] = {g: [] for g in GROUP_ORDER}
    for e in lexicon.entries:
        if e.type_id in partition.tasks:
            out[e.group].append(e.type_id)
    return out


# ---------------------------------------------------------------------------
# Dataset file: JSON Lines, one sample per line.

def write_jsonl(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w") as f:
        for s in dataset.samples:
            rec = {
                "sample_id": s.sample_id,
                "features": [float(v) for v in s.features],
                "answer": list(s.answer),
                "task_type": s.task_type_id,
            }
            if s.answer_counts:
                rec["answer_counts"] = {str(k): v for k, v in s.answer_counts.items()}
            f.write(json.dumps(rec) + "\n")


def read_jsonl(path: str | Path) -> Dataset:
    samples = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                counts = rec.get("answer_counts")
                samples.append(Sample(
                    sample_id=int(rec["sample_id"]),
                    features=np.asarray(rec["features"], dtype=np.float64),
                    answer=tuple(int(a) for a in rec["answer"]),
                    task_type_id=int(rec["task_type"]),
                    answer_counts={int(k): int(v) for k, v in counts.items()} if counts else None,
                ))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise ValidationError(f"{path}: malformed record at line {lineno}: {exc}") from exc
    if not samples:
        raise ValidationError(f"{path}: no samples")
    return Dataset.from_samples(samples)


# ---------------------------------------------------------------------------
# Annotation ingestion: JSON array of question records with string answers.

def ingest_annotations(
    path: str | Path,
    lexicon: TypeLexicon,
    min_answer_freq: int = 9,
) -> Dataset:
    """Build a dataset from a VQA-style annotation file.

    Records carry {"question_id", "question", "multiple_choice_answer"} and
    optionally "question_type" (used verbatim when it names a lexicon prefix,
    prefix inference otherwise) and "answers" (annotator answer strings, used
    for per-answer counts). The answer vocabulary keeps answers occurring at
    least `min_answer_freq` times; rarer answers fall out of the vocabulary and
    their samples are dropped. Features are a one-hot of the task type, a
    placeholder for real encodings which are out of scope here.
    """
    with open(path) as f:
        records = json.load(f)
    if not isinstance(records, list) or not records:
        raise ValidationError(f"{path}: expected a non-empty JSON array")

    prefix_to_id = {e.prefix: e.type_id for e in lexicon.entries}
    freq = Counter(str(r["multiple_choice_answer"]) for r in records)
    vocab = sorted(a for a, n in freq.items() if n >= min_answer_freq)
    if not vocab:
        raise ValidationError(f"{path}: no answer occurs >= {min_answer_freq} times")
    answer_to_id = {a: i for i, a in enumerate(vocab)}

    samples = []
    for i, rec in enumerate(records):
        try:
            ans = str(rec["multiple_choice_answer"])
            if ans not in answer_to_id:
                continue
            qtype = rec.get("question_type")
            if qtype is not None and qtype in prefix_to_id:
                type_id = prefix_to_id[qtype]
            else:
                type_id = lexicon.infer_type(rec["question"])
            counts: dict[int, int] | None = None
            if "answers" in rec:
                c = Counter(str(a) for a in rec["answers"])
                counts = {answer_to_id[a]: n for a, n in c.items() if a in answer_to_id}
            feats = np.zeros(len(lexicon))
            feats[type_id] = 1.0
            samples.append(Sample(
                sample_id=int(rec["question_id"]),
                features=feats,
                answer=(answer_to_id[ans],),
                task_type_id=type_id,
                answer_counts=counts,
            ))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: malformed annotation record {i}: {exc}") from exc
    if not samples:
        raise ValidationError(f"{path}: all samples dropped by the answer-frequency floor")
    return Dataset(samples, num_labels=len(vocab), feature_dim=len(lexicon))
