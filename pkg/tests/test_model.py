import numpy as np
import pytest

from seldagg.autograd import DimensionError, bce_loss, finite_diff_check, mse_loss
from seldagg.model import AGGREGATORS, ModelConfig, build_model, predictions_csv, predictions_to_track
from seldagg.track import track_from_csv

TOY = dict(num_classes=2, channels_in=2, frames=8, freq_bins=16, conv_filters=[3, 4, 4], pool_freq=[2, 2, 2], gru_hidden=5, dense_hidden=4)


def toy(aggregator="none", **kw):
    return ModelConfig(**{**TOY, "aggregator": aggregator, **kw})


def test_control_parameter_set():
    m = build_model(toy())
    names = set(m.parameters())
    expected = {f"backbone.conv{i}.kernel" for i in range(3)}
    expected |= {"gru.fwd.W", "gru.fwd.U", "gru.fwd.b"}
    for head in ("sed.dense0", "sed.dense1", "doa.dense0", "doa.dense1"):
        expected |= {f"{head}.weight", f"{head}.bias"}
    assert names == expected


@pytest.mark.parametrize("agg,nodes", [("panet", 6), ("bifpn", 4), ("sen1", 3), ("sen2", 1)])
def test_node_groups(agg, nodes):
    m = build_model(toy(agg))
    groups = {n.split(".")[1] for n in m.parameters() if n.startswith("agg.")}
    assert len(groups) == nodes == m.node_count()


def test_zero_input_gives_half():
    for agg in AGGREGATORS:
        m = build_model(toy(agg))
        sed, doa = m(np.zeros((2, 2, 8, 16)))
        np.testing.assert_array_equal(sed.data, 0.5)
        np.testing.assert_array_equal(doa.data, 0.0)


@pytest.mark.parametrize("agg", AGGREGATORS)
def test_output_contract(agg):
    m = build_model(toy(agg))
    x = np.random.default_rng(0).normal(size=(3, 2, 8, 16))
    sed, doa = m(x)
    assert sed.shape == (3, 8, 2) and doa.shape == (3, 8, 6)
    assert np.all((sed.data > 0) & (sed.data < 1))
    assert np.all(np.abs(doa.data) < 1)
    sed2, doa2 = m(x)
    assert sed.data.tobytes() == sed2.data.tobytes() and doa.data.tobytes() == doa2.data.tobytes()


def test_bidirectional_option():
    m = build_model(toy(bidirectional=True))
    assert "gru.bwd.U" in m.parameters()
    sed, _ = m(np.ones((1, 2, 8, 16)))
    assert sed.shape == (1, 8, 2)


def test_parameter_counts_monotone_in_nodes():
    counts = {}
    for agg in AGGREGATORS:
        m = build_model(ModelConfig(aggregator=agg))
        counts[m.node_count()] = m.parameter_count()
    ordered = [counts[k] for k in sorted(counts)]
    assert ordered == sorted(ordered) and len(set(ordered)) == len(ordered)


def test_shape_errors():
    m = build_model(toy())
    with pytest.raises(DimensionError):
        m(np.zeros((1, 2, 8, 15)))
    with pytest.raises(ValueError):
        toy(conv_filters=[3, 3])
    with pytest.raises(ValueError):
        toy(pool_freq=[4, 4, 4])
    with pytest.raises(ValueError):
        toy(aggregator="fpn")
    with pytest.raises(ValueError):
        ModelConfig.from_dict({**TOY, "dropout": 0.1})


def test_config_round_trip():
    cfg = toy("sen2")
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def randomize_biases(model, rng):
    for name, p in model.parameters().items():
        if name.endswith("bias") or name.endswith(".b") or name.endswith("fusion"):
            p.data[...] = rng.normal(scale=0.3, size=p.shape)


@pytest.mark.parametrize("agg", AGGREGATORS)
@pytest.mark.parametrize("seed", range(5))
def test_full_model_gradcheck(agg, seed):
    rng = np.random.default_rng(seed)
    m = build_model(toy(agg), rng)
    randomize_biases(m, rng)
    x = rng.normal(size=(2, 2, 8, 16))
    sed_t = (rng.random((2, 8, 2)) < 0.5).astype(float)
    doa_t = rng.uniform(-1, 1, size=(2, 8, 6))
    mask = np.repeat(sed_t, 3, axis=-1)

    def loss():
        sed, doa = m(x)
        return bce_loss(sed, sed_t) + mse_loss(doa, doa_t, mask)

    report = finite_diff_check(loss, m.parameters(), tolerance=1e-3, max_coords=6, rng=rng)
    assert report.passed, report.failures()
    assert set(report.errors) == set(m.parameters())


def test_predictions_to_track():
    sed = np.zeros((3, 2))
    assert predictions_to_track(sed, np.zeros((3, 6))).active.sum() == 0
    sed = np.array([[1.0, 0.49], [0.51, 0.0], [0.0, 0.0]])
    doa = np.zeros((3, 6))
    doa[0, :3] = (0.2, 0, 0)
    tr = predictions_to_track(sed, doa, 0.5)
    assert tr.active.tolist() == [[True, False], [True, False], [False, False]]
    np.testing.assert_allclose(tr.doa[0, 0], (1, 0, 0))
    np.testing.assert_array_equal(tr.doa[1, 0], 0)
    with pytest.raises(ValueError):
        predictions_to_track(sed, doa, 1.0)


def test_predictions_csv_round_trip():
    rng = np.random.default_rng(1)
    sed = rng.random((5, 3))
    doa = rng.uniform(-1, 1, (5, 9))
    back = track_from_csv(predictions_csv(sed, doa), frames=5, classes=3)
    ref = predictions_to_track(sed, doa)
    np.testing.assert_array_equal(back.active, ref.active)
    np.testing.assert_array_equal(back.doa[ref.active], ref.doa[ref.active])
