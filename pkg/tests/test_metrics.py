import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_lapline import scenes
from robust_lapline.errors import DomainError, NoCompleteLap
from robust_lapline.metrics import (format_cell, format_delta, lap_split, markdown_table,
                                    median_iqr, pairwise_deltas, rms, steer_energy, summarize)
from robust_lapline.telemetry import TelemetryLog

finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(values=st.lists(finite, min_size=3, max_size=50), c=st.floats(-10, 10))
def test_rms_scales_linearly(values, c):
    t = np.arange(len(values), dtype=float)
    f = np.array(values)
    assert rms(c * f, t) == pytest.approx(abs(c) * rms(f, t), rel=1e-9, abs=1e-9)


def test_rms_of_constant():
    t = np.linspace(0, 3, 31)
    assert rms(np.full(31, -2.0), t) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        rms([1.0], [0.0])


def test_steer_energy_of_sine():
    t = np.linspace(0.0, 2 * np.pi, 629)
    assert steer_energy(t, np.sin(t)) == pytest.approx(math.pi, abs=1e-3)
    with pytest.raises(DomainError):
        steer_energy(t[:50], t[:50])


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_summary_is_permutation_invariant(data):
    n = data.draw(st.integers(3, 20))
    recs = [{"driver": data.draw(st.sampled_from("AB")), "condition": data.draw(
        st.sampled_from(["NOM", "FLC"])), "LT": data.draw(st.floats(80, 90))} for _ in range(n)]
    perm = data.draw(st.permutations(recs))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert summarize(recs, "LT") == summarize(perm, "LT")


def test_table_cells():
    assert format_cell([84.32, 84.87, 85.42]) == "84.87 [0.55]"
    assert format_delta(84.78, 85.00) == "−0.22 (−0.3%)"
    assert format_delta(86.85, 85.00) == "+1.85 (+2%)"
    assert format_cell([-1.0, -1.0, -1.0]) == "−1.00 [0.00]"
    assert median_iqr([85, 86, 87]) == (86.0, 1.0)


def test_pairwise_and_markdown():
    recs = [{"driver": "A", "condition": c, "LT": v}
            for c, v in (("NOM", 85.0), ("NOM", 85.0), ("FLC", 84.78), ("FLC", 84.78))]
    table = pairwise_deltas(recs, "LT", [("FLC", "NOM")])
    assert table["A"]["FLC − NOM"] == "−0.22 (−0.3%)"
    md = markdown_table(summarize(recs, "LT"), "Lap time")
    assert "| A | 84.78 [0.00] | 85.00 [0.00] |" in md


def test_empty_group_warns():
    recs = [{"driver": "A", "condition": "NOM", "LT": float("nan")}]
    with pytest.warns(RuntimeWarning):
        assert summarize(recs, "LT") == {"A": {}}


def _circle_log(laps, rate=50.0, speed=20.0):
    tr = scenes.circle()
    T = tr.total_length / speed
    t = np.arange(0.0, laps * T + 2.0, 1.0 / rate) - 1.0
    a = speed * t / 50.0
    ch = dict(t=t + 1.0, x=50 * np.sin(a), y=50 * (1 - np.cos(a)), u=np.full_like(t, speed),
              v=np.zeros_like(t), delta=np.full_like(t, 0.05))
    return TelemetryLog(ch), tr, T


def test_lap_split_on_circle():
    log, tr, T = _circle_log(3)
    laps = lap_split(log, tr)
    assert len(laps) == 3
    for lap in laps:
        assert lap.lap_time == pytest.approx(T, rel=1e-4)


def test_no_complete_lap():
    log, tr, T = _circle_log(0.5)
    with pytest.raises(NoCompleteLap):
        lap_split(log, tr)
