"""Acceptance suite: every criterion at its stated tolerance and runtime bound.

Each test records a one-line verdict that is printed in the pytest terminal
summary (section "acceptance criteria") and also echoed immediately.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import ACCEPTANCE_RESULTS
from reference_values import IMPROVEMENT_ROWS, RESULT_ROWS, reported_report

from seldagg.aggregation import count_nodes, make_topology, sen_layer_sizes
from seldagg.bench import ExperimentConfig, layer_checks, model_check, train
from seldagg.bench.compare import compare
from seldagg.bench.gradcheck import toy_model_config
from seldagg.metrics import (
    SegmentCounts,
    composite_scores,
    doa_angle,
    error_decomposition,
    evaluate_tracks,
)
from seldagg.model import AGGREGATORS, ModelConfig
from seldagg.scene import AudioClip, GenerateConfig, bandpass_filter, decode_tensor, encode_tensor, generate_clips, stft_features
from seldagg.scene.dataset import read_dataset, write_dataset
from seldagg.track import FrameTrack

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
VARIANTS = ("panet", "bifpn", "sen1", "sen2")
SEEDS = range(5)


def record(key, ok, detail):
    ACCEPTANCE_RESULTS[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)


# -- 1. composite scores reproduce the reference rows ------------------------------------


def test_criterion_1_metric_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for er, f, sed, err, fr, doa, seld in RESULT_ROWS.values():
        got = composite_scores(f, er, err, fr)
        worst = max(worst, *(abs(g - w) for g, w in zip(got, (sed, doa, seld))))
    control = composite_scores(60.5, 0.41, 26.9, 65.3)
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.005 and elapsed < 1.0
    record("1", ok, f"5 rows x 3 scores, max |diff| {worst:.4f} <= 0.005; control row -> {control[0]:.4f}/{control[1]:.4f}/{control[2]:.4f}; {elapsed:.3f}s")
    assert ok


# -- 2. improvement table ------------------------------------------------------------------------


def test_criterion_2_improvement_table():
    t0 = time.perf_counter()
    variants = [(name, reported_report(name), IMPROVEMENT_ROWS[name][0]) for name in VARIANTS]
    rows = compare(reported_report("none"), variants)
    worst, cells = 0.0, 0
    for row in rows:
        want = IMPROVEMENT_ROWS[row.name][1:]
        got = (row.sed, row.sed_per_node, row.doa, row.doa_per_node, row.seld, row.seld_per_node)
        for g, w in zip(got, want):
            worst = max(worst, abs(g - w))
            cells += 1
    panet = rows[0]
    sen2 = rows[-1]
    single = sen2.seld_per_node == sen2.seld and sen2.sed_per_node == sen2.sed
    elapsed = time.perf_counter() - t0
    ok = cells == 24 and worst <= 0.15 and single and elapsed < 1.0
    record(
        "2",
        ok,
        f"{cells} cells, max |diff| {worst:.3f} pp <= 0.15; panet {panet.sed:.1f}/{panet.doa:.1f}/{panet.seld:.1f}, "
        f"per node {panet.sed_per_node:.2f}/{panet.doa_per_node:.2f}/{panet.seld_per_node:.2f}; {elapsed:.3f}s",
    )
    assert ok


# -- 3. topology oracles ---------------------------------------------------------------------------


def test_criterion_3_topology_oracles():
    t0 = time.perf_counter()
    scales = ModelConfig().backbone_scales()
    counts = {kind: count_nodes(make_topology(kind, scales)) for kind in VARIANTS}
    expected = {"panet": 6, "bifpn": 4, "sen1": 3, "sen2": 1}
    prog7 = [7] + sen_layer_sizes(7, 2)
    prog5 = [5] + sen_layer_sizes(5, 2)
    elapsed = time.perf_counter() - t0
    ok = counts == expected and prog7 == [7, 3, 1] and prog5 == [5, 2, 1] and elapsed < 1.0
    record("3", ok, f"nodes {counts}; SEN w=2 progressions {prog7} and {prog5}; {elapsed:.3f}s")
    assert ok


# -- 4. gradient suite -------------------------------------------------------------------------------


def test_criterion_4_gradient_suite():
    t0 = time.perf_counter()
    layer_worst, model_worst, failures = {}, {}, []
    for seed in SEEDS:
        for name, rep in layer_checks(tolerance=1e-4, recurrent_tolerance=1e-3, seed=seed).items():
            layer_worst[name] = max(layer_worst.get(name, 0.0), rep.max_error)
            if not rep.passed:
                failures.append(f"{name}@{seed}")
        for agg in AGGREGATORS:
            rep = model_check(toy_model_config(ModelConfig(aggregator=agg)), tolerance=1e-3, seed=seed)
            model_worst[agg] = max(model_worst.get(agg, 0.0), rep.max_error)
            if not rep.passed:
                failures.append(f"model-{agg}@{seed}")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 120.0
    lw = max(v for k, v in layer_worst.items() if k != "gru")
    record(
        "4",
        ok,
        f"{len(layer_worst)} layers + {len(model_worst)} models x 5 seeds; worst layer {lw:.1e} (<=1e-4), "
        f"gru {layer_worst['gru']:.1e}, model {max(model_worst.values()):.1e} (<=1e-3); failures {failures or 'none'}; {elapsed:.1f}s",
    )
    assert ok


# -- 5. metric closed forms ---------------------------------------------------------------------


def _arccos_deg(g, e):
    g = g / np.linalg.norm(g)
    e = e / np.linalg.norm(e)
    return np.degrees(np.arccos(np.clip(g @ e, -1.0, 1.0)))


def test_criterion_5_metric_closed_forms():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    exact = (
        doa_angle((1, 0, 0), (1, 0, 0)) == 0.0
        and abs(doa_angle((1, 0, 0), (0, 1, 0)) - 90.0) < 1e-12
        and abs(doa_angle((0, 0, 1), (0, 0, -1)) - 180.0) < 1e-12
    )
    pairs = rng.normal(size=(100, 2, 3))
    oracle_gap = max(abs(doa_angle(g, e) - _arccos_deg(g, e)) for g, e in pairs)

    fn, fp = rng.integers(0, 20, size=(2, 1000))
    tp = rng.integers(0, 20, size=1000)
    s, d, i = error_decomposition(SegmentCounts(tp, fp, fn, tp + fn))
    literal = int(np.sum(s + d + i == fn + fp))
    substitution_identity = int(np.sum(2 * s + d + i == fn + fp))
    max_identity = int(np.sum(s + d + i == np.maximum(fn, fp)))

    act = (rng.random((50, 4)) < 0.4).astype(float)
    v = rng.normal(size=(50, 4, 3))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    tr = FrameTrack(act, v * act[..., None])
    r = evaluate_tracks([tr], [tr], 10)
    fixed = (r.er, r.f, r.fr, r.seld) == (0.0, 1.0, 100.0, 0.0)
    elapsed = time.perf_counter() - t0

    ok = exact and oracle_gap < 1e-9 and literal == 1000 and fixed and elapsed < 5.0
    record(
        "5",
        ok,
        f"exact angles {'ok' if exact else 'BAD'}; arccos gap {oracle_gap:.1e} deg; "
        f"S+D+I = FN+FP holds on {literal}/1000 tuples (S=min(FN,FP) makes this hold only when min(FN,FP)=0; "
        f"2S+D+I = FN+FP holds on {substitution_identity}/1000, S+D+I = max(FN,FP) on {max_identity}/1000); "
        f"perfect fixed point {'ok' if fixed else 'BAD'}; {elapsed:.2f}s",
    )
    assert exact and oracle_gap < 1e-9 and fixed and substitution_identity == 1000
    assert literal == 1000, "S+D+I = FN+FP contradicts S=min(FN,FP), D=max(0,FN-FP), I=max(0,FP-FN)"


# -- 6. preprocessing ---------------------------------------------------------------------------


def _tone_db(x, freq, rate):
    seg = x[len(x) // 4 : 3 * len(x) // 4]
    w = np.hanning(len(seg))
    n = np.arange(len(seg))
    return 20 * np.log10(abs(np.sum(seg * w * np.exp(-2j * np.pi * freq * n / rate))) / (w.sum() / 2) + 1e-300)


def test_criterion_6_preprocessing(tmp_path):
    from scipy.signal import get_window

    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    window, hop = 1024, 256
    x = rng.normal(size=(2, 16000))
    mag = stft_features(AudioClip(x, 16000), window, hop)[:2]
    w = get_window("hann", window)
    parseval = 0.0
    for ch in range(2):
        for t in range(mag.shape[1]):
            seg = x[ch, t * hop : t * hop + window] * w
            m2 = mag[ch, t] ** 2
            spectral = (m2[0] + m2[-1] + 2 * m2[1:-1].sum()) / window
            parseval = max(parseval, abs(spectral - np.sum(seg**2)) / np.sum(seg**2))

    rate, t = 32000, np.arange(64000) / 32000
    in_band = {f: _tone_db(bandpass_filter(AudioClip(np.sin(2 * np.pi * f * t)[None], rate)).samples[0], f, rate) for f in (200.0, 1000.0, 5000.0)}
    out_band = {f: _tone_db(bandpass_filter(AudioClip(np.sin(2 * np.pi * f * t)[None], rate)).samples[0], f, rate) for f in (12.5, 12000.0)}

    clips = generate_clips(GenerateConfig(num_clips=5, duration=0.25, window=128, hop=128, seed=3))
    blob_ok = all(decode_tensor(encode_tensor(c.features)).tobytes() == c.features.tobytes() for c in clips)
    write_dataset(tmp_path / "ds", clips, num_classes=4)
    back = read_dataset(tmp_path / "ds")
    ds_ok = blob_ok and all(a.features.tobytes() == b.features.tobytes() and a.track.equals(b.track) for a, b in zip(clips, back))
    elapsed = time.perf_counter() - t0

    loss = max(abs(v) for v in in_band.values())
    atten = -max(out_band.values())
    ok = parseval <= 1e-6 and loss <= 1.0 and atten >= 40.0 and ds_ok and elapsed < 30.0
    record("6", ok, f"Parseval rel err {parseval:.1e}; in-band loss {loss:.3f} dB; out-of-band attenuation {atten:.1f} dB; round-trip {'bitwise' if ds_ok else 'BAD'}; {elapsed:.1f}s")
    assert ok


# -- 7 & 8. smoke experiment ---------------------------------------------------------------------


def smoke_base(dataset_dir) -> ExperimentConfig:
    doc = json.loads((CONFIGS / "smoke_experiment.json").read_text())
    doc["dataset"] = str(dataset_dir)
    return ExperimentConfig.from_dict(doc)


@pytest.fixture(scope="module")
def smoke_dataset(tmp_path_factory):
    cfg = GenerateConfig.from_dict(json.loads((CONFIGS / "smoke_generate.json").read_text()))
    root = tmp_path_factory.mktemp("smoke")
    clips = generate_clips(cfg)
    write_dataset(root / "ds", clips, cfg.num_classes)
    return root / "ds", read_dataset(root / "ds")


SMOKE_RUNS: dict = {}


@pytest.mark.slow
def test_criterion_7_aggregators_beat_control(smoke_dataset, tmp_path_factory):
    ds_dir, clips = smoke_dataset
    base = smoke_base(ds_dir)
    t0 = time.perf_counter()
    seld = {}
    for seed in SEEDS:
        for agg in AGGREGATORS:
            cfg = base.with_aggregator(agg).with_seed(seed)
            out = tmp_path_factory.mktemp(f"run-{agg}-{seed}")
            res = train(cfg, out, clips=clips)
            seld[agg, seed] = res.log.final_seld
            SMOKE_RUNS[agg, seed] = (cfg, res, out)
            print(f"  seed {seed} {agg:<6} SELD {res.log.final_seld:.4f} (initial {res.log.initial['seld']:.4f}, best epoch {res.log.best_epoch})", flush=True)
    elapsed = time.perf_counter() - t0
    wins = {agg: sum(seld[agg, s] < seld["none", s] for s in SEEDS) for agg in VARIANTS}
    improved = all(seld[k] < SMOKE_RUNS[k][1].log.initial["seld"] for k in seld)
    ok = all(w >= 4 for w in wins.values()) and elapsed < 1800.0
    means = {agg: float(np.mean([seld[agg, s] for s in SEEDS])) for agg in AGGREGATORS}
    record(
        "7",
        ok,
        f"wins over control (of 5 seeds) {wins}; mean SELD {', '.join(f'{k} {v:.3f}' for k, v in means.items())}; "
        f"all runs beat their untrained SELD: {improved}; {elapsed / 60:.1f} min (< 30)",
    )
    assert ok


@pytest.mark.slow
def test_criterion_8_reproducibility(smoke_dataset, tmp_path_factory):
    ds_dir, clips = smoke_dataset
    t0 = time.perf_counter()
    key = ("panet", 0)
    if key in SMOKE_RUNS:
        cfg, first, first_dir = SMOKE_RUNS[key]
    else:
        cfg = smoke_base(ds_dir).with_aggregator("panet").with_seed(0)
        first_dir = tmp_path_factory.mktemp("repro-a")
        first = train(cfg, first_dir, clips=clips)
    second_dir = tmp_path_factory.mktemp("repro-b")
    second = train(cfg, second_dir, clips=clips)
    same_log = first.log.to_dict(include_time=False) == second.log.to_dict(include_time=False)
    same_ckpt = (first_dir / "checkpoint.json").read_bytes() == (second_dir / "checkpoint.json").read_bytes()
    elapsed = time.perf_counter() - t0
    ok = same_log and same_ckpt
    record("8", ok, f"panet seed 0, {len(second.log.epochs)} epochs: TrainingLog identical {same_log} (wall time excluded), checkpoint bytes identical {same_ckpt}; {elapsed:.0f}s")
    assert ok
