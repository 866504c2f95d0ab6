import numpy as np
import pytest

from seldagg.track import CSV_HEADER, FrameTrack, read_track, track_from_csv, track_to_csv, write_track


def sample(seed=0, frames=6, classes=3):
    rng = np.random.default_rng(seed)
    act = rng.random((frames, classes))
    doa = rng.normal(size=(frames, classes, 3))
    return FrameTrack(act, doa)


def test_shape_validation():
    with pytest.raises(ValueError):
        FrameTrack(np.zeros((3, 2)), np.zeros((3, 2, 2)))
    with pytest.raises(ValueError):
        FrameTrack(np.zeros(3), np.zeros((3, 3)))


def test_csv_round_trip_bitwise(tmp_path):
    tr = sample()
    assert track_from_csv(track_to_csv(tr)).equals(tr)
    write_track(tr, tmp_path / "t.csv")
    assert read_track(tmp_path / "t.csv").equals(tr)


def test_csv_header_and_rows():
    text = track_to_csv(sample(frames=2, classes=2))
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 1 + 4


def test_missing_rows_are_inactive():
    text = "frame,class,activity,x,y,z\n1,0,1.0,0,0,1\n"
    tr = track_from_csv(text, frames=3, classes=2)
    assert tr.active.sum() == 1 and tr.active[1, 0]
    assert tr.doa[1, 0].tolist() == [0, 0, 1]


def test_bad_csv():
    with pytest.raises(ValueError):
        track_from_csv("a,b\n")
    with pytest.raises(ValueError):
        track_from_csv("frame,class,activity,x,y,z\n0,0,1\n")
    with pytest.raises(ValueError):
        track_from_csv("frame,class,activity,x,y,z\n5,0,1,0,0,1\n", frames=2, classes=1)


def test_flat_layout_and_roll():
    tr = sample()
    flat = tr.doa_flat()
    assert flat.shape == (6, 9)
    np.testing.assert_array_equal(flat[:, 3:6], tr.doa[:, 1, :])
    assert tr.roll(2).roll(-2).equals(tr)
