import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_lapline import scenes
from robust_lapline.backoff import (BackoffConfig, lateral_offset_gradient, normal_cdf,
                                    normal_quantile, track_backoff)
from robust_lapline.errors import ConfigError, DomainError, InfeasibleCorridor


@settings(max_examples=200, deadline=None)
@given(p=st.floats(1e-12, 1 - 1e-12))
def test_quantile_round_trip(p):
    assert normal_cdf(normal_quantile(p)) == pytest.approx(p, rel=1e-9, abs=1e-15)


@given(p=st.floats(1e-6, 0.5))
def test_quantile_antisymmetry(p):
    assert normal_quantile(p) == pytest.approx(-normal_quantile(1 - p), abs=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_quantile_domain(p):
    with pytest.raises(DomainError):
        normal_quantile(p)


def test_multiplier_prefers_gamma():
    assert BackoffConfig("TLC", gamma=3.0).multiplier("TLC") == 3.0
    cfg = BackoffConfig("TLC", p=0.99, gamma=None)
    assert cfg.multiplier("TLC") == pytest.approx(2.326348, abs=1e-6)


def test_config_validation():
    with pytest.raises(ConfigError):
        BackoffConfig("NOREF")
    with pytest.raises(ConfigError):
        BackoffConfig("FLC", p=0.4)


def test_offset_gradient_against_projection():
    tr = scenes.chicane()
    rng = np.random.default_rng(5)
    for s in rng.uniform(0, tr.total_length, 20):
        cx, cy = tr.centerline(s)
        th = float(tr.heading(s))
        x0, y0 = cx - 1.0 * math.sin(th), cy + 1.0 * math.cos(th)
        g = lateral_offset_gradient(th)
        h = 1e-5
        for i, (dx, dy) in ((3, (h, 0.0)), (4, (0.0, h))):
            _, n_p = tr.project(np.array([x0 + dx]), np.array([y0 + dy]), np.array([s]))
            _, n_m = tr.project(np.array([x0 - dx]), np.array([y0 - dy]), np.array([s]))
            assert (n_p[0] - n_m[0]) / (2 * h) == pytest.approx(g[i], abs=1e-5)


def test_track_backoff_scales_with_sigma():
    P = np.diag([0, 0, 0, 0.04, 0.09, 0])
    bv = track_backoff(P, 0.0, BackoffConfig("TLC", gamma=3.0))
    assert bv.sigma == pytest.approx(0.3) and bv.beta == pytest.approx(0.9)
    with pytest.raises(InfeasibleCorridor):
        track_backoff(P * 100, 0.0, BackoffConfig("TLC"), corridor=(-2.0, 2.0))


def test_position_covariance_example():
    P = np.zeros((6, 6))
    P[3, 3], P[4, 4] = 0.04, 0.01
    bv = track_backoff(P, -math.pi / 2, BackoffConfig("TLC", gamma=3.0))
    assert bv.sigma == pytest.approx(0.2) and bv.beta == pytest.approx(0.6)
