import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seldagg.scene import (
    AudioClip,
    AugmentConfig,
    Clip,
    CorruptDatasetError,
    GenerateConfig,
    SceneEvent,
    SceneSpec,
    amp_scale,
    augment,
    bandpass_filter,
    decode_tensor,
    encode_tensor,
    freq_shift,
    generate_clips,
    mic_positions,
    read_dataset,
    resample_to_16k,
    stft_features,
    synthesize_scene,
    time_shift,
    write_dataset,
    write_wav,
)
from seldagg.track import FrameTrack


def tone(freq, rate, seconds, amp=1.0):
    t = np.arange(int(rate * seconds)) / rate
    return AudioClip(amp * np.sin(2 * np.pi * freq * t)[None, :], rate)


def tone_level_db(x, freq, rate):
    """Amplitude of a steady tone via a single-bin DFT (Goertzel-style) on the middle half."""
    seg = x[len(x) // 4 : 3 * len(x) // 4]
    w = np.hanning(len(seg))
    n = np.arange(len(seg))
    bin_val = np.sum(seg * w * np.exp(-2j * np.pi * freq * n / rate))
    return 20 * np.log10(abs(bin_val) / (w.sum() / 2) + 1e-300)


# -- band-pass -------------------------------------------------------------------------


@pytest.mark.parametrize("freq", [100.0, 440.0, 1000.0, 3000.0, 7000.0])
def test_bandpass_in_band_within_1db(freq):
    y = bandpass_filter(tone(freq, 32000, 1.0)).samples[0]
    assert abs(tone_level_db(y, freq, 32000)) <= 1.0


@pytest.mark.parametrize("freq", [12.5, 15000.0])
def test_bandpass_out_of_band_40db(freq):
    y = bandpass_filter(tone(freq, 32000, 2.0)).samples[0]
    assert tone_level_db(y, freq, 32000) <= -40.0


def test_bandpass_zero_and_errors():
    z = AudioClip(np.zeros((2, 1000)), 16000)
    assert np.all(bandpass_filter(z).samples == 0)
    for band in [(0, 100), (200, 100), (50, 8000)]:
        with pytest.raises(ValueError):
            bandpass_filter(z, *band)


# -- resampling -----------------------------------------------------------------


def test_resample_identity_and_constant():
    x = AudioClip(np.random.default_rng(0).normal(size=(2, 320)), 16000)
    np.testing.assert_array_equal(resample_to_16k(x).samples, x.samples)
    c = resample_to_16k(AudioClip(np.full((1, 6400), 0.25), 32000))
    assert c.rate == 16000 and c.num_samples == 3200
    np.testing.assert_allclose(c.samples, 0.25, atol=1e-9)


def test_resample_tone_preserved():
    y = resample_to_16k(tone(1000.0, 32000, 1.0))
    assert abs(tone_level_db(y.samples[0], 1000.0, 16000)) <= 1.0
    assert abs(y.duration - 1.0) <= 1.0 / 16000


def test_resample_rates():
    y = resample_to_16k(AudioClip(np.zeros((1, 44100)), 44100))
    assert abs(y.num_samples - 16000) <= 1
    with pytest.raises(ValueError):
        resample_to_16k(AudioClip(np.zeros((1, 100)), 8000))
    with pytest.raises(ValueError):
        resample_to_16k(AudioClip(np.zeros((1, 100)), 16001))


# -- STFT ----------------------------------------------------------------------------------


def test_stft_shape_and_ranges():
    x = AudioClip(np.random.default_rng(1).normal(size=(3, 5000)), 16000)
    f = stft_features(x, 1024, 256)
    assert f.shape == (6, (5000 - 1024) // 256 + 1, 513)
    assert np.all(f[:3] >= 0)
    assert np.all(f[3:] > -np.pi) and np.all(f[3:] <= np.pi)


def test_stft_bin_centre_tone():
    window, hop, k = 1024, 256, 64
    x = tone(k * 16000 / window, 16000, 0.5)
    mag = stft_features(x, window, hop)[0]
    for frame in mag:
        assert np.argmax(frame) == k
        far = np.delete(frame, [k - 1, k, k + 1])
        assert 20 * np.log10(frame[k] / far.max()) >= 20.0


def test_stft_parseval_per_frame():
    from scipy.signal import get_window

    window, hop = 256, 100
    x = np.random.default_rng(3).normal(size=(2, 2000))
    spec = np.fft.rfft(np.lib.stride_tricks.sliding_window_view(x, window, axis=-1)[:, ::hop] * get_window("hann", window), axis=-1)
    mag = stft_features(AudioClip(x, 16000), window, hop)[:2]
    np.testing.assert_allclose(mag, np.abs(spec), rtol=1e-12)
    w = get_window("hann", window)
    for ch in range(2):
        for t in range(mag.shape[1]):
            seg = x[ch, t * hop : t * hop + window] * w
            m2 = mag[ch, t] ** 2
            spectral = (m2[0] + m2[-1] + 2 * m2[1:-1].sum()) / window
            assert abs(spectral - np.sum(seg**2)) <= 1e-6 * np.sum(seg**2)


def test_stft_zero_and_short():
    assert np.all(stft_features(AudioClip(np.zeros((1, 300)), 16000), 128, 64)[0] == 0)
    with pytest.raises(ValueError):
        stft_features(AudioClip(np.zeros((1, 100)), 16000), 128, 64)


# -- synthesis ---------------------------------------------------------------------


def spec_with(events, **kw):
    base = dict(duration=0.5, sample_rate=32000, num_channels=4, window=256, hop=128, num_classes=3, seed=4)
    base.update(kw)
    return SceneSpec(events=events, **base)


def test_empty_scene_is_noise_only():
    clip, track = synthesize_scene(spec_with([], noise_floor=1e-3))
    assert track.active.sum() == 0
    assert 0.5e-3 < clip.samples.std() < 2e-3


def test_full_event_active_everywhere():
    clip, track = synthesize_scene(spec_with([SceneEvent(1, 0.0, 0.5, (0, 0, 1))]))
    assert track.active[:, 1].all() and not track.active[:, [0, 2]].any()
    np.testing.assert_allclose(track.doa[:, 1], [[0, 0, 1]] * track.num_frames)
    assert np.max(np.abs(clip.samples)) <= 1.0


def test_synthesis_deterministic():
    s = spec_with([SceneEvent(0, 0.1, 0.3, (1, 0, 0)), SceneEvent(2, 0.2, 0.5, (0, 1, 0))])
    a, ta = synthesize_scene(s)
    b, tb = synthesize_scene(s)
    assert a.samples.tobytes() == b.samples.tobytes() and ta.equals(tb)


def test_invalid_events():
    with pytest.raises(ValueError):
        spec_with([SceneEvent(0, 0.3, 0.2, (1, 0, 0))])
    with pytest.raises(ValueError):
        spec_with([SceneEvent(0, 0.1, 0.9, (1, 0, 0))])
    with pytest.raises(ValueError):
        spec_with([SceneEvent(0, 0.1, 0.2, (1, 1, 0))])


def test_label_alignment_with_window_centres():
    s = spec_with([SceneEvent(0, 0.1, 0.3, (1, 0, 0))])
    _, track = synthesize_scene(s)
    centres = (np.arange(track.num_frames) * s.hop + s.window / 2) / 16000
    np.testing.assert_array_equal(track.active[:, 0], (centres >= 0.1) & (centres < 0.3))


def test_classes_have_distinct_signatures():
    mags = []
    for c in range(3):
        clip, _ = synthesize_scene(spec_with([SceneEvent(c, 0.0, 0.5, (1, 0, 0))], noise_floor=0))
        m = stft_features(resample_to_16k(clip), 256, 128)[0].mean(axis=0)
        mags.append(m / np.linalg.norm(m))
    for i in range(3):
        for j in range(i + 1, 3):
            assert mags[i] @ mags[j] < 0.9


def test_direction_changes_channel_levels():
    e = lambda d: spec_with([SceneEvent(0, 0.0, 0.5, d)], noise_floor=0)
    mics = mic_positions(4)
    toward = tuple(mics[0] / np.linalg.norm(mics[0]))
    clip, _ = synthesize_scene(e(toward))
    rms = np.sqrt((clip.samples**2).mean(axis=1))
    assert np.argmax(rms) == 0


def test_energy_monotone_in_amplitude():
    def band_energy(amp):
        clip, _ = synthesize_scene(spec_with([SceneEvent(1, 0.0, 0.5, (0, 0, 1), amp)]))
        return np.sum(stft_features(resample_to_16k(clip), 256, 128)[:4] ** 2)

    assert band_energy(0.4) >= band_energy(0.2)


def test_wav_export(tmp_path):
    from scipy.io import wavfile

    clip, _ = synthesize_scene(spec_with([SceneEvent(0, 0.0, 0.2, (1, 0, 0))]))
    write_wav(clip, tmp_path / "a.wav")
    rate, data = wavfile.read(tmp_path / "a.wav")
    assert rate == 32000 and data.shape == (clip.num_samples, 4) and data.dtype == np.int16


# -- augmentation -------------------------------------------------------------------


def feat_and_track(seed=0, T=12, F=9, C=2):
    rng = np.random.default_rng(seed)
    feats = np.concatenate([rng.random((2, T, F)), rng.uniform(-np.pi, np.pi, (2, T, F))])
    act = (rng.random((T, C)) < 0.4).astype(float)
    return feats, FrameTrack(act, rng.normal(size=(T, C, 3)) * act[..., None])


def test_zero_magnitude_augment_is_identity():
    f, t = feat_and_track()
    cfg = AugmentConfig(max_time_shift=0.0, max_freq_shift=0, amp_range=(1.0, 1.0))
    f2, t2 = augment(f, t, config=cfg, seed=3)
    np.testing.assert_array_equal(f2, f)
    assert t2.equals(t)


def test_time_shift_inverse_and_label_alignment():
    f, t = feat_and_track()
    f2, t2 = time_shift(f, t, 3)
    np.testing.assert_array_equal(f2[:, 3], f[:, 0])
    np.testing.assert_array_equal(t2.class_activity[3], t.class_activity[0])
    f3, t3 = time_shift(f2, t2, -3)
    np.testing.assert_array_equal(f3, f)
    assert t3.equals(t)


def test_freq_shift_and_amp_scale():
    f, t = feat_and_track()
    f2, t2 = freq_shift(f, t, 2)
    np.testing.assert_array_equal(f2[:, :, 2], f[:, :, 0])
    assert t2 is t
    f3, _ = amp_scale(f, t, 2.0)
    np.testing.assert_array_equal(f3[:2], 2 * f[:2])
    np.testing.assert_array_equal(f3[2:], f[2:])


def test_augment_range_errors():
    f, t = feat_and_track(T=4, F=3)
    with pytest.raises(ValueError):
        time_shift(f, t, 4)
    with pytest.raises(ValueError):
        freq_shift(f, t, -3)
    with pytest.raises(ValueError):
        augment(f, t, ops=("warp",))


def test_augment_deterministic_per_seed():
    f, t = feat_and_track()
    a = augment(f, t, seed=9)
    b = augment(f, t, seed=9)
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1].equals(b[1])


# -- dataset I/O ------------------------------------------------------------------------


def random_clips(n, seed=0):
    out = []
    for i in range(n):
        f, t = feat_and_track(seed + i)
        out.append(Clip(f"c{i}", f, t, "test" if i % 3 == 0 else "train"))
    return out


def test_dataset_round_trip_bitwise(tmp_path):
    clips = random_clips(5)
    write_dataset(tmp_path / "ds", clips, num_classes=2)
    back = read_dataset(tmp_path / "ds")
    assert [c.name for c in back] == [c.name for c in clips]
    for a, b in zip(clips, back):
        assert a.features.tobytes() == b.features.tobytes()
        assert a.track.equals(b.track) and a.split == b.split
    assert len(read_dataset(tmp_path / "ds", split="test")) == 2


def test_truncated_payload_detected(tmp_path):
    blob = encode_tensor(np.arange(12.0).reshape(3, 4))
    with pytest.raises(CorruptDatasetError, match="truncated"):
        decode_tensor(blob[:-8])
    with pytest.raises(CorruptDatasetError, match="magic"):
        decode_tensor(b"XXXXXXXX" + blob[8:])
    write_dataset(tmp_path, random_clips(1), num_classes=2)
    p = tmp_path / "c0.feat"
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(CorruptDatasetError):
        read_dataset(tmp_path)


def test_empty_directory(tmp_path):
    assert read_dataset(tmp_path) == []


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(-5, 5), st.integers(-2, 2))
def test_augment_commutes_with_io(seed, dt, df):
    f, t = feat_and_track(seed)
    a = freq_shift(*time_shift(f, t, dt), df)
    back = decode_tensor(encode_tensor(f))
    b = freq_shift(*time_shift(back, t, dt), df)
    assert a[0].tobytes() == b[0].tobytes() and a[1].equals(b[1])


def test_generate_clips_smoke():
    cfg = GenerateConfig(num_clips=6, duration=0.25, window=128, hop=128, augment_copies=1, seed=2)
    clips = generate_clips(cfg)
    assert sum(c.split == "test" for c in clips) == 1
    assert len(clips) == 6 + 5
    assert clips[0].features.shape == (8, 31, 65)
    again = generate_clips(cfg)
    assert all(a.features.tobytes() == b.features.tobytes() for a, b in zip(clips, again))
