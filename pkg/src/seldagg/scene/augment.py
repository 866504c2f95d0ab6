from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..track import FrameTrack

AUGMENT_OPS = ("time_shift", "freq_shift", "amp_scale")


@dataclass
class AugmentConfig:
    max_time_shift: float = 0.1  # fraction of T
    max_freq_shift: int = 2  # bins
    amp_range: tuple[float, float] = (0.5, 2.0)


def _magnitude_planes(features: np.ndarray) -> int:
    if features.ndim != 3 or features.shape[0] % 2:
        raise ValueError(f"features must be [2*channels, T, F], got {features.shape}")
    return features.shape[0] // 2


def time_shift(features: np.ndarray, track: FrameTrack, k: int) -> tuple[np.ndarray, FrameTrack]:
    T = features.shape[1]
    if abs(k) >= T or track.num_frames != T:
        raise ValueError(f"time shift {k} out of range for T={T}")
    return np.roll(features, k, axis=1), track.roll(k)


def freq_shift(features: np.ndarray, track: FrameTrack, k: int) -> tuple[np.ndarray, FrameTrack]:
    F = features.shape[2]
    if abs(k) >= F:
        raise ValueError(f"frequency shift {k} out of range for F={F}")
    return np.roll(features, k, axis=2), track


def amp_scale(features: np.ndarray, track: FrameTrack, factor: float) -> tuple[np.ndarray, FrameTrack]:
    if factor <= 0:
        raise ValueError("amplitude factor must be positive")
    c = _magnitude_planes(features)
    out = features.copy()
    out[:c] *= factor
    return out, track


def augment(
    features: np.ndarray,
    track: FrameTrack,
    ops=AUGMENT_OPS,
    config: AugmentConfig | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, FrameTrack]:
    """Apply each op with a magnitude drawn uniformly from its configured range."""
    config = config or AugmentConfig()
    _magnitude_planes(features)
    rng = np.random.default_rng(seed)
    T = features.shape[1]
    for op in ops:
        if op == "time_shift":
            m = int(np.floor(config.max_time_shift * T))
            if m >= T:
                raise ValueError("time shift range exceeds the clip")
            features, track = time_shift(features, track, int(rng.integers(-m, m + 1)))
        elif op == "freq_shift":
            m = config.max_freq_shift
            features, track = freq_shift(features, track, int(rng.integers(-m, m + 1)))
        elif op == "amp_scale":
            lo, hi = config.amp_range
            # log-uniform so that 0.5 and 2 are equally likely
            f = float(np.exp(rng.uniform(np.log(lo), np.log(hi)))) if hi > lo else float(lo)
            features, track = amp_scale(features, track, f)
        else:
            raise ValueError(f"unknown augmentation {op!r}")
    return features, track
