"""Synthetic multichannel sound scenes with frame-level ground truth.

Every class renders a fixed parametric template (harmonic stack, amplitude
modulation and a class-specific noise band). Direction of arrival is encoded
by per-microphone gains and fractional-sample delays on a small virtual
array, so both level and phase cues are present in the multichannel signal.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from ..track import FrameTrack

SPEED_OF_SOUND = 343.0
ARRAY_RADIUS = 0.042


@dataclass
class AudioClip:
    samples: np.ndarray  # [channels, n]
    rate: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.rate


@dataclass
class SceneEvent:
    class_id: int
    onset: float
    offset: float
    doa: tuple[float, float, float]
    amplitude: float = 0.5


@dataclass
class SceneSpec:
    duration: float
    sample_rate: int = 32000
    num_channels: int = 4
    events: list[SceneEvent] = field(default_factory=list)
    noise_floor: float = 1e-3
    seed: int = 0
    num_classes: int | None = None
    # feature framing used for the ground-truth track
    feature_rate: int = 16000
    window: int = 1024
    hop: int = 256

    def __post_init__(self):
        self.events = [e if isinstance(e, SceneEvent) else SceneEvent(**e) for e in self.events]
        if self.duration <= 0 or self.sample_rate <= 0 or self.num_channels < 1:
            raise ValueError("duration, sample_rate and num_channels must be positive")
        for e in self.events:
            if e.class_id < 0:
                raise ValueError(f"negative class id {e.class_id}")
            if not (0.0 <= e.onset < e.offset <= self.duration + 1e-12):
                raise ValueError(f"event [{e.onset}, {e.offset}) outside clip of {self.duration} s")
            if abs(float(np.linalg.norm(e.doa)) - 1.0) > 1e-6:
                raise ValueError(f"event DOA {e.doa} is not unit-norm")
        if self.num_classes is not None and any(e.class_id >= self.num_classes for e in self.events):
            raise ValueError("event class id exceeds num_classes")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        d["events"] = [SceneEvent(**{**e, "doa": tuple(e["doa"])}) for e in d.get("events", [])]
        return cls(**d)


def mic_positions(n: int, radius: float = ARRAY_RADIUS) -> np.ndarray:
    """Tetrahedral array for 4 channels; Fibonacci-sphere points otherwise."""
    if n == 4:
        p = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    elif n == 1:
        p = np.array([[1.0, 0.0, 0.0]])
    else:
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        phi = math.pi * (1 + math.sqrt(5)) * k
        r = np.sqrt(1 - z * z)
        p = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return radius * p / np.linalg.norm(p, axis=1, keepdims=True)


def class_template(class_id: int, n: int, rate: int) -> np.ndarray:
    """Deterministic class signature, peak roughly 1."""
    t = np.arange(n) / rate
    f0 = 180.0 * 1.25**class_id
    tilt = 1.0 + 0.25 * (class_id % 3)
    sig = np.zeros(n)
    for k in range(1, 6):
        if k * f0 < 0.45 * rate:
            sig += np.sin(2 * math.pi * k * f0 * t + 0.7 * k * class_id) / k**tilt
    am_rate = 3.0 + 2.0 * class_id
    sig *= 1.0 + 0.4 * (class_id % 2) * np.sin(2 * math.pi * am_rate * t)
    # narrow noise band a little above the fundamental
    noise = np.random.default_rng(7919 + class_id).normal(size=n)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, 1.0 / rate)
    centre = f0 * (2.5 + 0.5 * (class_id % 4))
    spec[np.abs(freqs - centre) > 0.15 * centre] = 0.0
    band = np.fft.irfft(spec, n)
    scale = np.max(np.abs(band))
    if scale > 0:
        sig += 0.3 * band / scale
    return sig / max(np.max(np.abs(sig)), 1e-12)


def fractional_delay(x: np.ndarray, delay: float) -> np.ndarray:
    """Delay by a (possibly fractional) number of samples via a linear phase ramp."""
    n = len(x)
    spec = np.fft.rfft(x)
    k = np.arange(len(spec))
    return np.fft.irfft(spec * np.exp(-2j * math.pi * k * delay / n), n)


def _fade(n: int, rate: int) -> np.ndarray:
    m = min(int(0.002 * rate), n // 4)
    env = np.ones(n)
    if m > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(m) + 0.5) / m)
        env[:m] = ramp
        env[-m:] = ramp[::-1]
    return env


def render_event(event: SceneEvent, n_total: int, rate: int, mics: np.ndarray) -> np.ndarray:
    a = int(round(event.onset * rate))
    b = min(int(round(event.offset * rate)), n_total)
    out = np.zeros((len(mics), n_total))
    if b <= a:
        return out
    u = np.asarray(event.doa, dtype=np.float64)
    # arrival time relative to the array centre: mics facing the source hear it first
    delays = -(mics @ u) / SPEED_OF_SOUND * rate
    gains = 0.6 + 0.4 * (mics @ u) / np.linalg.norm(mics, axis=1)
    pad = int(math.ceil(np.max(np.abs(delays)))) + 8
    body = event.amplitude * class_template(event.class_id, b - a, rate) * _fade(b - a, rate)
    padded = np.concatenate([np.zeros(pad), body, np.zeros(pad)])
    lo, hi = a - pad, b + pad
    src_lo, src_hi = max(0, -lo), len(padded) - max(0, hi - n_total)
    for ch, (d, g) in enumerate(zip(delays, gains)):
        shifted = g * fractional_delay(padded, d)
        out[ch, max(lo, 0) : min(hi, n_total)] += shifted[src_lo:src_hi]
    return out


def num_frames(num_samples: int, window: int, hop: int) -> int:
    if num_samples < window:
        raise ValueError(f"{num_samples} samples are fewer than one {window}-sample window")
    return (num_samples - window) // hop + 1


def resampled_length(n: int, rate: int, target: int) -> int:
    return -(-n * target // rate)


def ground_truth_track(spec: SceneSpec, num_classes: int) -> FrameTrack:
    """Class active in every frame whose window centre falls inside [onset, offset)."""
    n_out = resampled_length(int(round(spec.duration * spec.sample_rate)), spec.sample_rate, spec.feature_rate)
    T = num_frames(n_out, spec.window, spec.hop)
    centres = (np.arange(T) * spec.hop + spec.window / 2) / spec.feature_rate
    track = FrameTrack.empty(T, num_classes)
    for e in spec.events:
        on = (centres >= e.onset) & (centres < e.offset)
        track.class_activity[on, e.class_id] = 1.0
        track.doa[on, e.class_id] = e.doa
    return track


def synthesize_scene(spec: SceneSpec) -> tuple[AudioClip, FrameTrack]:
    n = int(round(spec.duration * spec.sample_rate))
    mics = mic_positions(spec.num_channels)
    rng = np.random.default_rng(spec.seed)
    x = spec.noise_floor * rng.normal(size=(spec.num_channels, n))
    for e in spec.events:
        x += render_event(e, n, spec.sample_rate, mics)
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak > 1.0:
        x /= peak
    C = spec.num_classes if spec.num_classes is not None else max((e.class_id for e in spec.events), default=-1) + 1
    return AudioClip(x, spec.sample_rate), ground_truth_track(spec, C)


def random_direction(rng: np.random.Generator) -> tuple[float, float, float]:
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return tuple(float(c) for c in v)


def random_scene(
    rng: np.random.Generator,
    num_classes: int,
    max_sources: int = 2,
    duration: float = 0.5,
    min_event: float = 0.1,
    **kwargs,
) -> SceneSpec:
    """Up to ``max_sources`` events of distinct classes; overlap never exceeds that count."""
    k = int(rng.integers(1, max_sources + 1))
    classes = rng.choice(num_classes, size=min(k, num_classes), replace=False)
    events = []
    for c in classes:
        length = float(rng.uniform(min_event, duration))
        onset = float(rng.uniform(0.0, duration - length))
        amp = float(rng.uniform(0.3, 0.6))
        events.append(SceneEvent(int(c), onset, onset + length, random_direction(rng), amp))
    return SceneSpec(duration=duration, events=events, seed=int(rng.integers(2**31)), num_classes=num_classes, **kwargs)


def write_wav(clip: AudioClip, path: str | Path) -> None:
    """16-bit PCM export for listening; channels become WAV channels."""
    pcm = np.clip(np.round(clip.samples.T * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(str(path), clip.rate, pcm)
