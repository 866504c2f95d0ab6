"""Training loop with early stopping on the held-out SELD score."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..autograd import Adam, assign_parameters, bce_loss, load_checkpoint, mse_loss, no_grad, save_checkpoint
from ..metrics import MetricsReport, evaluate_tracks
from ..model import SELDModel, build_model, predictions_to_track
from ..scene.dataset import Clip, read_dataset
from .config import ExperimentConfig

LOG_FLOOR = 1e-8


class NumericError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    er: float
    f: float
    doa_error: float
    fr: float
    sed_score: float
    doa_score: float
    seld: float
    wall_time: float


@dataclass
class TrainingLog:
    epochs: list[EpochRecord] = field(default_factory=list)
    initial: dict = field(default_factory=dict)
    best_epoch: int = 0
    best_seld: float = math.inf
    stopped_early: bool = False

    def to_dict(self, include_time: bool = True) -> dict:
        d = asdict(self)
        if not include_time:
            for e in d["epochs"]:
                e.pop("wall_time")
        return d

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @property
    def final_seld(self) -> float:
        """SELD of the retained (best) checkpoint."""
        return self.best_seld


@dataclass
class TrainResult:
    log: TrainingLog
    model: SELDModel
    buffers: dict[str, np.ndarray]
    checkpoint: Path | None = None


# -- data preparation -----------------------------------------------------------------


def transform_features(feats: np.ndarray, log_magnitude: bool) -> np.ndarray:
    x = np.array(feats, dtype=np.float64)
    if log_magnitude:
        c = x.shape[-3] // 2
        x[..., :c, :, :] = np.log(x[..., :c, :, :] + LOG_FLOOR)
    return x


def feature_stats(clips: Sequence[Clip], log_magnitude: bool) -> dict[str, np.ndarray]:
    """Per (plane, frequency) mean and std over all training frames."""
    x = np.stack([transform_features(c.features, log_magnitude) for c in clips])
    mean = x.mean(axis=(0, 2), keepdims=True)[0]
    std = x.std(axis=(0, 2), keepdims=True)[0]
    return {"feature_mean": mean, "feature_std": np.where(std > 1e-12, std, 1.0)}


def prepare_batch(clips: Sequence[Clip], cfg: ExperimentConfig, buffers: dict[str, np.ndarray]) -> np.ndarray:
    x = np.stack([transform_features(c.features, cfg.log_magnitude) for c in clips])
    if cfg.standardize and buffers:
        x = (x - buffers["feature_mean"]) / buffers["feature_std"]
    return x


def targets(clips: Sequence[Clip]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sed = np.stack([c.track.class_activity for c in clips])
    doa = np.stack([c.track.doa_flat() for c in clips])
    mask = np.repeat(sed, 3, axis=-1)
    return sed, doa, mask


def check_shapes(model: SELDModel, clips: Sequence[Clip]) -> None:
    cfg = model.config
    for c in clips:
        want = (cfg.channels_in, cfg.frames, cfg.freq_bins)
        if c.features.shape != want:
            raise ValueError(f"clip {c.name}: features {c.features.shape} do not match model input {want}")
        if c.track.num_classes != cfg.num_classes:
            raise ValueError(f"clip {c.name}: {c.track.num_classes} label classes, model has {cfg.num_classes}")


def split_clips(clips: Sequence[Clip]) -> tuple[list[Clip], list[Clip]]:
    train = [c for c in clips if c.split == "train"]
    test = [c for c in clips if c.split == "test"]
    if not train or not test:
        raise ValueError(f"dataset needs both train and test clips (got {len(train)} / {len(test)})")
    return train, test


# -- evaluation -------------------------------------------------------------------------------


def predict(model: SELDModel, clips: Sequence[Clip], cfg: ExperimentConfig, buffers, batch_size: int = 64):
    sed_all, doa_all = [], []
    with no_grad():
        for i in range(0, len(clips), batch_size):
            sed, doa = model(prepare_batch(clips[i : i + batch_size], cfg, buffers))
            sed_all.append(sed.data)
            doa_all.append(doa.data)
    return np.concatenate(sed_all), np.concatenate(doa_all)


def evaluate_model(model: SELDModel, clips: Sequence[Clip], cfg: ExperimentConfig, buffers) -> MetricsReport:
    sed, doa = predict(model, clips, cfg, buffers)
    preds = [predictions_to_track(s, d, cfg.sed_threshold) for s, d in zip(sed, doa)]
    return evaluate_tracks([c.track for c in clips], preds, cfg.frames_per_segment)


def evaluate(checkpoint: str | Path, cfg: ExperimentConfig, clips: Sequence[Clip] | None = None, split: str = "test") -> MetricsReport:
    """Load a checkpoint into a model built from ``cfg`` and score it on a split."""
    params, buffers, _ = load_checkpoint(checkpoint)
    model = build_model(cfg.model, cfg.seed)
    assign_parameters(model.parameters(), params)
    clips = list(clips) if clips is not None else read_dataset(cfg.dataset, split=split)
    check_shapes(model, clips)
    return evaluate_model(model, clips, cfg, buffers)


# -- training -----------------------------------------------------------------------------------


def train(cfg: ExperimentConfig, out_dir: str | Path | None = None, clips: Sequence[Clip] | None = None, verbose: bool = False) -> TrainResult:
    clips = list(clips) if clips is not None else read_dataset(cfg.dataset)
    train_clips, test_clips = split_clips(clips)
    model = build_model(cfg.model, cfg.seed)
    check_shapes(model, clips)
    buffers = feature_stats(train_clips, cfg.log_magnitude) if cfg.standardize else {}
    params = model.parameters()
    opt = Adam(params, **cfg.optimizer)
    rng = np.random.default_rng(cfg.seed + 1)
    w_bce, w_mse = cfg.loss_weights["bce"], cfg.loss_weights["mse"]

    x_train = prepare_batch(train_clips, cfg, buffers)
    sed_t, doa_t, mask_t = targets(train_clips)

    log = TrainingLog(initial=evaluate_model(model, test_clips, cfg, buffers).to_dict())
    best = {k: p.data.copy() for k, p in params.items()}
    wait = 0
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_clips))
        total, seen = 0.0, 0
        for i in range(0, len(order), cfg.batch_size):
            idx = order[i : i + cfg.batch_size]
            opt.zero_grad()
            sed, doa = model(x_train[idx])
            loss = w_bce * bce_loss(sed, sed_t[idx]) + w_mse * mse_loss(doa, doa_t[idx], mask_t[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"non-finite loss {value} at epoch {epoch}, batch {i // cfg.batch_size}")
            loss.backward()
            opt.step()
            total += value * len(idx)
            seen += len(idx)
        report = evaluate_model(model, test_clips, cfg, buffers)
        rec = EpochRecord(
            epoch,
            total / seen,
            report.er,
            report.f,
            report.doa_error,
            report.fr,
            report.sed_score,
            report.doa_score,
            report.seld,
            time.perf_counter() - t0,
        )
        log.epochs.append(rec)
        if verbose:
            print(f"epoch {epoch:4d}  loss {rec.train_loss:.4f}  SELD {rec.seld:.4f}  ER {rec.er:.3f}  F {rec.f:.3f}  DOA {rec.doa_error:.1f}  FR {rec.fr:.1f}")
        if report.seld < log.best_seld:
            log.best_seld, log.best_epoch = report.seld, epoch
            best = {k: p.data.copy() for k, p in params.items()}
            wait = 0
        else:
            wait += 1
            if wait >= cfg.patience:
                log.stopped_early = True
                break

    for k, p in params.items():
        p.data[...] = best[k]
    ckpt = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ckpt = out / "checkpoint.json"
        meta = {"config": cfg.to_dict(), "best_epoch": log.best_epoch, "best_seld": log.best_seld}
        save_checkpoint(ckpt, params, buffers, meta)
        log.write(out / "training_log.json")
    return TrainResult(log, model, buffers, ckpt)
