"""Experiment configuration (JSON) and its schema."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

from ..model import ModelConfig

EXPERIMENT_SCHEMA = {
    "type": "object",
    "required": ["model", "dataset"],
    "properties": {
        "model": {"type": "object"},
        "dataset": {"type": "string"},
        "loss_weights": {
            "type": "object",
            "properties": {"bce": {"type": "number", "minimum": 0}, "mse": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
        "optimizer": {
            "type": "object",
            "properties": {
                "lr": {"type": "number", "minimum": 0},
                "beta1": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "beta2": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "eps": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "max_epochs": {"type": "integer", "minimum": 1},
        "patience": {"type": "integer", "minimum": 1},
        "batch_size": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "frames_per_segment": {"type": "integer", "minimum": 1},
        "sed_threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "log_magnitude": {"type": "boolean"},
        "standardize": {"type": "boolean"},
    },
    "additionalProperties": False,
}


@dataclass
class ExperimentConfig:
    model: ModelConfig
    dataset: str
    loss_weights: dict = field(default_factory=lambda: {"bce": 1.0, "mse": 1.0})
    optimizer: dict = field(default_factory=lambda: {"lr": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8})
    max_epochs: int = 200
    patience: int = 20
    batch_size: int = 16
    seed: int = 0
    frames_per_segment: int = 62
    sed_threshold: float = 0.5
    log_magnitude: bool = True
    standardize: bool = True

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig.from_dict(self.model)
        self.loss_weights = {"bce": 1.0, "mse": 1.0, **self.loss_weights}
        self.optimizer = {"lr": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, **self.optimizer}
        jsonschema.validate(self.to_dict(), EXPERIMENT_SCHEMA)
        if self.loss_weights["bce"] == 0 and self.loss_weights["mse"] == 0:
            raise ValueError("loss weights must not both be zero")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        jsonschema.validate(d, EXPERIMENT_SCHEMA)
        return cls(**copy.deepcopy(d))

    def with_aggregator(self, aggregator: str) -> "ExperimentConfig":
        d = self.to_dict()
        d["model"]["aggregator"] = aggregator
        return ExperimentConfig.from_dict(d)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig.from_dict({**self.to_dict(), "seed": seed})


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    cfg = ExperimentConfig.from_dict(json.loads(path.read_text()))
    ds = Path(cfg.dataset)
    if not ds.is_absolute():
        # dataset paths are relative to the config file
        cfg.dataset = str((path.parent / ds).resolve()) if (path.parent / ds).exists() else cfg.dataset
    return cfg


def differs_only_in_aggregator(a: ExperimentConfig, b: ExperimentConfig) -> bool:
    da, db = a.to_dict(), b.to_dict()
    da["model"].pop("aggregator")
    db["model"].pop("aggregator")
    return da == db


def variant_configs(base: ExperimentConfig, aggregators) -> dict[str, ExperimentConfig]:
    out = {agg: base.with_aggregator(agg) for agg in aggregators}
    assert all(differs_only_in_aggregator(base, c) for c in out.values())
    return out
