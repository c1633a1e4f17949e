"""Hypersphere nearest-prototype classification with angular-margin training
and margin-area active learning."""

__version__ = "0.1.0"

from .acquisition import (
    ConfidenceScore,
    Strategy,
    coreset_greedy,
    entropy_confidence,
    margin_confidence,
    max_confidence,
    random_scores,
    top_k_select,
)
from .classifier import HyperParams, ModelParams, TrainStats, fit, predict
from .data import Dataset, Sample, SynthConfig, gen_blobs, load_jsonl, split
from .engine import ALConfig, LearningCurve, PoolState, RoundRecord, run_experiment
from .hypersphere import cosine, l2_normalize, margin_cosine

__all__ = [
    "ALConfig",
    "ConfidenceScore",
    "Dataset",
    "HyperParams",
    "LearningCurve",
    "ModelParams",
    "PoolState",
    "RoundRecord",
    "Sample",
    "Strategy",
    "SynthConfig",
    "TrainStats",
    "coreset_greedy",
    "cosine",
    "entropy_confidence",
    "fit",
    "gen_blobs",
    "l2_normalize",
    "load_jsonl",
    "margin_confidence",
    "margin_cosine",
    "max_confidence",
    "predict",
    "random_scores",
    "run_experiment",
    "split",
    "top_k_select",
]
