"""Diffusion schedule, conditional training step and reverse sampler."""
from .conditions import (
    MODES,
    ConditionedCorpus,
    ConditionEncoder,
    assemble,
    build_corpus,
    condition_names,
    daily_stats,
)
from .process import (
    DivergenceError,
    TrainingBatch,
    corrupt,
    network_conditioning,
    prepare_inputs,
    restore_conditions,
    reverse_step,
    sample,
    training_step,
)
from .schedule import DiffusionSchedule, linear_beta_schedule
from .train import TrainConfig, TrainResult, generate, load_checkpoint, save_checkpoint, train

__all__ = [
    "MODES",
    "ConditionEncoder",
    "ConditionedCorpus",
    "DiffusionSchedule",
    "DivergenceError",
    "TrainConfig",
    "TrainResult",
    "TrainingBatch",
    "assemble",
    "build_corpus",
    "condition_names",
    "corrupt",
    "daily_stats",
    "generate",
    "linear_beta_schedule",
    "load_checkpoint",
    "network_conditioning",
    "prepare_inputs",
    "restore_conditions",
    "reverse_step",
    "sample",
    "save_checkpoint",
    "train",
    "training_step",
]
