"""SELDnet-style CRNN with an optional feature aggregator.

Backbone: three blocks of (3x3 conv, ReLU, max-pool over frequency). The block
outputs are the backbone scales P0..P2. With an aggregator, its outputs are
resampled to the coarsest backbone scale and fused by a learned weighted
average; without one, the coarsest block output is used directly. Either way
the result is flattened per frame, run through a GRU and split into an SED
branch (dense, dense + sigmoid) and a DOA branch (dense, dense + tanh).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .aggregation import Aggregator, ScaleShape, count_nodes, make_topology, resample_to
from .aggregation.aggregator import FUSION_INIT, glorot_kernel
from .autograd import (
    DimensionError,
    Parameter,
    Tensor,
    bidirectional_gru,
    conv2d,
    dense,
    gru_layer,
    max_pool,
    relu,
    sigmoid,
    tanh,
    weighted_average,
)
from .track import FrameTrack, track_to_csv

AGGREGATORS = ("none", "panet", "bifpn", "sen1", "sen2")


@dataclass
class ModelConfig:
    num_classes: int = 4
    channels_in: int = 8
    frames: int = 31
    freq_bins: int = 65
    conv_filters: list[int] = field(default_factory=lambda: [32, 32, 32])
    pool_freq: list[int] = field(default_factory=lambda: [4, 4, 2])
    gru_hidden: int = 64
    dense_hidden: int = 64
    aggregator: str = "none"
    bidirectional: bool = False
    fusion: str = "softplus"

    def __post_init__(self):
        self.conv_filters = [int(v) for v in self.conv_filters]
        self.pool_freq = [int(v) for v in self.pool_freq]
        self.aggregator = self.aggregator.lower()
        self.validate()

    def validate(self) -> None:
        for name in ("num_classes", "channels_in", "frames", "freq_bins", "gru_hidden", "dense_hidden"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if len(self.conv_filters) != 3 or len(self.pool_freq) != 3:
            raise ValueError("the backbone has exactly 3 conv blocks: conv_filters and pool_freq need 3 entries")
        if min(self.conv_filters) < 1 or min(self.pool_freq) < 1:
            raise ValueError("conv_filters and pool_freq entries must be positive")
        f = self.freq_bins
        for p in self.pool_freq:
            f //= p
            if f < 1:
                raise ValueError(f"pooling {self.pool_freq} leaves no frequency bins from F={self.freq_bins}")
        if self.aggregator != "none" and not (self.aggregator in ("panet", "bifpn") or self.aggregator.startswith("sen")):
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        if self.fusion not in ("softplus", "plain"):
            raise ValueError(f"unknown fusion mode {self.fusion!r}")

    def backbone_scales(self) -> list[ScaleShape]:
        scales, f = [], self.freq_bins
        for c, p in zip(self.conv_filters, self.pool_freq):
            f //= p
            scales.append(ScaleShape(c, self.frames, f))
        return scales

    def with_aggregator(self, aggregator: str) -> "ModelConfig":
        return ModelConfig(**{**self.to_dict(), "aggregator": aggregator})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class SELDModel:
    def __init__(self, config: ModelConfig, rng: np.random.Generator | int = 0):
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        self.config = config
        cfg = config
        self.conv: list[Parameter] = []
        c_prev = cfg.channels_in
        for i, c in enumerate(cfg.conv_filters):
            self.conv.append(Parameter(glorot_kernel(rng, c, c_prev, 3, 3), f"backbone.conv{i}.kernel"))
            c_prev = c
        self.scales = cfg.backbone_scales()
        coarse = self.scales[-1]

        self.aggregator: Aggregator | None = None
        self.adapter: dict[str, Parameter] = {}
        if cfg.aggregator != "none":
            spec = make_topology(cfg.aggregator, self.scales)
            self.aggregator = Aggregator(spec, rng, prefix="agg", fusion=cfg.fusion)
            outs = spec.output_scales()
            for k, s in enumerate(outs):
                if s.channels != coarse.channels:
                    self.adapter[f"proj{k}"] = Parameter(glorot_kernel(rng, coarse.channels, s.channels), f"adapter.proj{k}")
            if len(outs) > 1:
                init = FUSION_INIT if cfg.fusion == "softplus" else 1.0 / len(outs)
                self.adapter["fusion"] = Parameter(np.full(len(outs), init), "adapter.fusion")

        H = cfg.gru_hidden
        d_in = coarse.channels * coarse.freq
        directions = ("fwd", "bwd") if cfg.bidirectional else ("fwd",)
        self.gru: dict[str, tuple[Parameter, Parameter, Parameter]] = {}
        for d in directions:
            W = np.concatenate([_glorot(rng, d_in, H) for _ in range(3)], axis=1)
            U = np.concatenate([_orthogonal(rng, H) for _ in range(3)], axis=1)
            self.gru[d] = (
                Parameter(W, f"gru.{d}.W"),
                Parameter(U, f"gru.{d}.U"),
                Parameter(np.zeros(3 * H), f"gru.{d}.b"),
            )
        rnn_out = H * len(directions)
        C, Dh = cfg.num_classes, cfg.dense_hidden
        self.heads: dict[str, tuple[Parameter, Parameter]] = {}
        for name, fan_in, fan_out in (
            ("sed.dense0", rnn_out, Dh),
            ("sed.dense1", Dh, C),
            ("doa.dense0", rnn_out, Dh),
            ("doa.dense1", Dh, 3 * C),
        ):
            self.heads[name] = (
                Parameter(_glorot(rng, fan_in, fan_out), f"{name}.weight"),
                Parameter(np.zeros(fan_out), f"{name}.bias"),
            )
        self._params = self._collect()

    def _collect(self) -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        groups = [self.conv]
        if self.aggregator is not None:
            groups.append(list(self.aggregator.parameters().values()))
        groups.append(list(self.adapter.values()))
        groups.extend(list(g) for g in self.gru.values())
        groups.extend(list(h) for h in self.heads.values())
        for group in groups:
            for p in group:
                if p.name in out:
                    raise ValueError(f"duplicate parameter name {p.name}")
                out[p.name] = p
        return out

    def parameters(self) -> dict[str, Parameter]:
        return dict(self._params)

    def parameter_count(self) -> int:
        return sum(p.size for p in self._params.values())

    def node_count(self) -> int:
        return 0 if self.aggregator is None else count_nodes(self.aggregator.spec)

    def backbone(self, x: Tensor) -> list[Tensor]:
        feats = []
        for kernel, p in zip(self.conv, self.config.pool_freq):
            x = max_pool(relu(conv2d(x, kernel, padding="same")), (1, p))
            feats.append(x)
        return feats

    def aggregate(self, feats: list[Tensor]) -> Tensor:
        if self.aggregator is None:
            return feats[-1]
        outs = self.aggregator(feats)
        coarse = self.scales[-1]
        resampled = [resample_to(o, coarse, self.adapter.get(f"proj{k}")) for k, o in enumerate(outs)]
        if len(resampled) == 1:
            return resampled[0]
        return weighted_average(resampled, self.adapter["fusion"], mode=self.config.fusion)

    def forward(self, features) -> tuple[Tensor, Tensor]:
        """[B, channels_in, T, F] -> (sed [B, T, C], doa [B, T, 3C])."""
        x = features if isinstance(features, Tensor) else Tensor(features)
        cfg = self.config
        expected = (cfg.channels_in, cfg.frames, cfg.freq_bins)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise DimensionError(f"model expects [B, {expected[0]}, {expected[1]}, {expected[2]}], got {x.shape}")
        z = self.aggregate(self.backbone(x))
        B, c, T, f = z.shape
        seq = z.transpose(0, 2, 1, 3).reshape(B, T, c * f)
        if cfg.bidirectional:
            h = bidirectional_gru(seq, self.gru["fwd"], self.gru["bwd"])
        else:
            h = gru_layer(seq, *self.gru["fwd"])
        w0, b0 = self.heads["sed.dense0"]
        w1, b1 = self.heads["sed.dense1"]
        sed = sigmoid(dense(dense(h, w0, b0), w1, b1))
        w0, b0 = self.heads["doa.dense0"]
        w1, b1 = self.heads["doa.dense1"]
        doa = tanh(dense(dense(h, w0, b0), w1, b1))
        return sed, doa

    __call__ = forward


def build_model(config: ModelConfig, rng: np.random.Generator | int = 0) -> SELDModel:
    return SELDModel(config, rng)


def model_forward(model: SELDModel, features) -> tuple[Tensor, Tensor]:
    return model.forward(features)


def predictions_to_track(sed: np.ndarray, doa: np.ndarray, threshold: float = 0.5) -> FrameTrack:
    """Binarize SED at ``threshold`` and unit-normalize each class's DOA triplet."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    sed = np.asarray(sed, dtype=np.float64)
    T, C = sed.shape
    vec = np.asarray(doa, dtype=np.float64).reshape(T, C, 3)
    norms = np.linalg.norm(vec, axis=-1, keepdims=True)
    unit = np.divide(vec, norms, out=np.zeros_like(vec), where=norms > 0)
    return FrameTrack((sed >= threshold).astype(np.float64), unit)


def predictions_csv(sed: np.ndarray, doa: np.ndarray, threshold: float = 0.5) -> str:
    """Prediction export in the track CSV format (binary activity, unit DOA)."""
    return track_to_csv(predictions_to_track(sed, doa, threshold))
