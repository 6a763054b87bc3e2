"""Task-progressive curriculum scheduling with transport-based difficulty scoring."""

from .dataset import (
    Dataset,
    Sample,
    TaskPartition,
    ValidationError,
    coarse_partition,
    ingest_annotations,
    partition_by_type,
    read_jsonl,
    write_jsonl,
)
from .difficulty import (
    ConsolidationWindow,
    DifficultyVector,
    LossReport,
    consolidate,
    divergence_vector,
    mean_difficulty,
    task_histograms,
)
from .histograms import HistogramGrid, ScoreHistogram, build_histogram, fit_grid
from .lexicon import CoarseGroup, TypeLexicon, default_lexicon
from .ot import BACKEND, TransportPlan, ot_divergence, transport_plan
from .pacing import PacingConfig, PacingPlan, pace_decremental, pace_discrete, pace_incremental
from .scheduler import (
    CurriculumStage,
    EmbeddedTrainer,
    ExternalTrainer,
    ScheduleRunner,
    SchedulerConfig,
    plan_fixed_stages,
    plan_stage,
)
from .synthetic import SyntheticSpec, generate_synthetic
from .trainer import EvalResult, ToyModel, TrainConfig, evaluate, sample_losses, score_all, train_cycle

__version__ = "0.1.0"
