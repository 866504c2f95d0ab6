"""Preprocessing chain: band-pass, resample to 16 kHz, STFT features."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from .synth import AudioClip, num_frames

TARGET_RATE = 16000
MAX_RATIO_TERM = 1000  # admits 44.1 kHz (160/441)


def bandpass_taps(rate: int, low_hz: float, high_hz: float, attenuation_db: float = 60.0, numtaps: int | None = None) -> np.ndarray:
    """Kaiser-windowed sinc band-pass. The transition band is half the lower edge
    (capped by the distance from the upper edge to Nyquist)."""
    nyq = rate / 2.0
    if not (0 < low_hz < high_hz < nyq):
        raise ValueError(f"invalid band [{low_hz}, {high_hz}] for rate {rate}")
    width = min(low_hz / 2.0, (nyq - high_hz) / 2.0, (high_hz - low_hz) / 2.0)
    n, beta = signal.kaiserord(attenuation_db, width / nyq)
    if numtaps is not None:
        n = numtaps
    n |= 1  # odd length: type I, zero-phase under 'same' convolution
    return signal.firwin(n, [low_hz - width / 2, high_hz + width / 2], window=("kaiser", beta), pass_zero=False, fs=rate)


def bandpass_filter(clip: AudioClip, low_hz: float = 50.0, high_hz: float = 7500.0, attenuation_db: float = 60.0, numtaps: int | None = None) -> AudioClip:
    taps = bandpass_taps(clip.rate, low_hz, high_hz, attenuation_db, numtaps)
    y = signal.fftconvolve(clip.samples, taps[None, :], mode="same", axes=-1)
    return AudioClip(y, clip.rate)


def resample_to_16k(clip: AudioClip, target: int = TARGET_RATE) -> AudioClip:
    if clip.rate == target:
        return AudioClip(clip.samples.copy(), clip.rate)
    if clip.rate < target:
        raise ValueError(f"cannot upsample from {clip.rate} Hz")
    ratio = Fraction(target, clip.rate)
    if ratio.numerator > MAX_RATIO_TERM or ratio.denominator > MAX_RATIO_TERM:
        raise ValueError(f"unsupported rate ratio {ratio} ({clip.rate} -> {target} Hz)")
    y = signal.resample_poly(clip.samples, ratio.numerator, ratio.denominator, axis=-1, padtype="line")
    return AudioClip(y, target)


def stft_frames(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Windowed frames [channels, T, window] with a periodic Hann window."""
    num_frames(x.shape[-1], window, hop)
    w = signal.get_window("hann", window, fftbins=True)
    return sliding_window_view(x, window, axis=-1)[:, ::hop, :] * w


def stft_features(clip: AudioClip, window: int = 1024, hop: int = 256) -> np.ndarray:
    """[2*channels, T, window//2 + 1]: magnitude planes then phase planes in (-pi, pi]."""
    spec = np.fft.rfft(stft_frames(clip.samples, window, hop), axis=-1)
    mag = np.abs(spec)
    phase = np.angle(spec)
    phase[phase <= -np.pi] = np.pi
    return np.concatenate([mag, phase], axis=0)


def preprocess(clip: AudioClip, low_hz: float = 50.0, high_hz: float = 7500.0, window: int = 1024, hop: int = 256) -> np.ndarray:
    return stft_features(resample_to_16k(bandpass_filter(clip, low_hz, high_hz)), window, hop)
