import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_lapline import scenes
from robust_lapline.errors import GridTooCoarse, MalformedTrack, TopologyError
from robust_lapline.track import load_track, make_grid, track_from_arrays, write_track


@pytest.mark.parametrize("builder, length", [
    (scenes.circle, 2 * np.pi * 50.0),
    (scenes.oval, 600.0),
])
def test_builder_lengths(builder, length):
    tr = builder()
    assert tr.closed
    assert tr.total_length == pytest.approx(length, rel=1e-4)


def test_chicane_closes_and_has_its_tightest_bend():
    tr = scenes.chicane()
    assert tr.total_length == pytest.approx(755.57, abs=0.01)
    assert np.max(np.abs(tr.kappa)) == pytest.approx(1 / 30, rel=0.05)
    assert tr.x[-1] == pytest.approx(tr.x[0]) and tr.y[-1] == pytest.approx(tr.y[0])


def test_circle_curvature_and_heading():
    tr = scenes.circle(radius=50.0)
    assert np.allclose(tr.kappa, 1 / 50.0, rtol=1e-3)
    assert tr.theta[-1] - tr.theta[0] == pytest.approx(2 * np.pi)


def test_csv_round_trip(tmp_path):
    tr = scenes.oval()
    path = tmp_path / "oval.csv"
    write_track(path, tr.s[:-1], tr.x[:-1], tr.y[:-1], tr.w_left[:-1], tr.w_right[:-1])
    back = load_track(path)
    assert back.total_length == pytest.approx(tr.total_length, rel=1e-9)
    assert np.allclose(back.kappa, tr.kappa, atol=1e-8)


def test_missing_column_is_reported(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("s,x,y,w_left\n0,0,0,1\n")
    with pytest.raises(MalformedTrack):
        load_track(path)


def test_open_gap_is_a_topology_error():
    s = np.linspace(0, 100, 50)
    with pytest.raises(TopologyError):
        track_from_arrays(s, s, np.zeros(50), np.ones(50), np.ones(50), closed=True)


def test_narrow_radius_rejected():
    with pytest.raises(MalformedTrack):
        scenes.circle(radius=4.0, width=5.0)


def test_grid_lower_bound():
    with pytest.raises(GridTooCoarse):
        make_grid(scenes.circle(), 9)
    g = make_grid(scenes.circle(), 100)
    assert g.ds == pytest.approx(scenes.circle().total_length / 100)


@settings(max_examples=50, deadline=None)
@given(s=st.floats(0.0, 600.0), n=st.floats(-4.0, 4.0))
def test_projection_inverts_offset(s, n):
    tr = scenes.oval()
    cx, cy = tr.centerline(s)
    th = tr.heading(s)
    x, y = cx - n * np.sin(th), cy + n * np.cos(th)
    s_hat, n_hat = tr.project(np.array([x]), np.array([y]), np.array([s + 0.5]))
    gap = (s_hat[0] - s + 300.0) % 600.0 - 300.0
    assert abs(gap) < 1e-3
    assert n_hat[0] == pytest.approx(n, abs=1e-3)
