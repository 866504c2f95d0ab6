"""Build a labelled feature dataset from random or explicit scene specs."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .augment import AUGMENT_OPS, AugmentConfig, augment
from .dataset import Clip, write_dataset
from .dsp import preprocess
from .synth import SceneSpec, random_scene, synthesize_scene, write_wav


@dataclass
class GenerateConfig:
    num_clips: int = 200
    test_fraction: float = 0.2
    num_classes: int = 4
    max_sources: int = 2
    duration: float = 0.5
    sample_rate: int = 32000
    num_channels: int = 4
    noise_floor: float = 1e-3
    low_hz: float = 50.0
    high_hz: float = 7500.0
    window: int = 1024
    hop: int = 256
    augment_copies: int = 0  # augmented copies per training clip
    augment: dict = field(default_factory=dict)
    seed: int = 0
    scenes: list[dict] = field(default_factory=list)  # explicit specs override random ones

    @classmethod
    def from_dict(cls, d: dict) -> "GenerateConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown generate config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def scene_specs(cfg: GenerateConfig) -> list[SceneSpec]:
    frame = dict(window=cfg.window, hop=cfg.hop)
    if cfg.scenes:
        return [SceneSpec.from_dict({**frame, "num_classes": cfg.num_classes, **s}) for s in cfg.scenes]
    rng = np.random.default_rng(cfg.seed)
    return [
        random_scene(
            rng,
            cfg.num_classes,
            cfg.max_sources,
            cfg.duration,
            sample_rate=cfg.sample_rate,
            num_channels=cfg.num_channels,
            noise_floor=cfg.noise_floor,
            **frame,
        )
        for _ in range(cfg.num_clips)
    ]


def generate_clips(cfg: GenerateConfig, wav_dir: str | Path | None = None) -> list[Clip]:
    specs = scene_specs(cfg)
    n_test = int(round(cfg.test_fraction * len(specs)))
    aug_cfg = AugmentConfig(**cfg.augment) if cfg.augment else AugmentConfig()
    clips = []
    for i, spec in enumerate(specs):
        audio, track = synthesize_scene(spec)
        if wav_dir is not None:
            Path(wav_dir).mkdir(parents=True, exist_ok=True)
            write_wav(audio, Path(wav_dir) / f"clip{i:04d}.wav")
        feats = preprocess(audio, cfg.low_hz, cfg.high_hz, cfg.window, cfg.hop)
        split = "test" if i >= len(specs) - n_test else "train"
        clips.append(Clip(f"clip{i:04d}", feats, track, split))
        if split == "train":
            for j in range(cfg.augment_copies):
                f2, t2 = augment(feats, track, AUGMENT_OPS, aug_cfg, seed=cfg.seed * 100003 + i * 101 + j)
                clips.append(Clip(f"clip{i:04d}_aug{j}", f2, t2, split))
    return clips


def generate_dataset(cfg: GenerateConfig, out: str | Path, wav_dir: str | Path | None = None) -> Path:
    return write_dataset(out, generate_clips(cfg, wav_dir), cfg.num_classes, {"generate": cfg.to_dict()})
