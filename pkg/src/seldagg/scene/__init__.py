"""Synthetic scenes, preprocessing and dataset storage."""

from .augment import AUGMENT_OPS, AugmentConfig, amp_scale, augment, freq_shift, time_shift
from .dataset import Clip, CorruptDatasetError, decode_tensor, encode_tensor, iter_dataset, read_dataset, read_tensor, write_dataset, write_tensor
from .dsp import bandpass_filter, bandpass_taps, preprocess, resample_to_16k, stft_features
from .generate import GenerateConfig, generate_clips, generate_dataset
from .synth import AudioClip, SceneEvent, SceneSpec, mic_positions, num_frames, random_scene, synthesize_scene, write_wav

__all__ = [
    "AUGMENT_OPS",
    "AudioClip",
    "AugmentConfig",
    "Clip",
    "CorruptDatasetError",
    "GenerateConfig",
    "SceneEvent",
    "SceneSpec",
    "amp_scale",
    "augment",
    "bandpass_filter",
    "bandpass_taps",
    "decode_tensor",
    "encode_tensor",
    "freq_shift",
    "generate_clips",
    "generate_dataset",
    "iter_dataset",
    "mic_positions",
    "num_frames",
    "preprocess",
    "random_scene",
    "read_dataset",
    "read_tensor",
    "resample_to_16k",
    "stft_features",
    "synthesize_scene",
    "time_shift",
    "write_dataset",
    "write_tensor",
    "write_wav",
]
