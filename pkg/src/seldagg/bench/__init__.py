"""Experiment driver: configs, training, gradient checks, comparisons and the CLI."""

from .compare import compare, comparison_csv, comparison_json
from .config import ExperimentConfig, differs_only_in_aggregator, load_config, variant_configs
from .gradcheck import layer_checks, model_check, run_gradcheck
from .train import EpochRecord, NumericError, TrainingLog, TrainResult, evaluate, evaluate_model, train

__all__ = [
    "EpochRecord",
    "ExperimentConfig",
    "NumericError",
    "TrainResult",
    "TrainingLog",
    "compare",
    "comparison_csv",
    "comparison_json",
    "differs_only_in_aggregator",
    "evaluate",
    "evaluate_model",
    "layer_checks",
    "load_config",
    "model_check",
    "run_gradcheck",
    "train",
    "variant_configs",
]
