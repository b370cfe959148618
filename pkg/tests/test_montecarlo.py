import numpy as np
import pytest

from robust_lapline.montecarlo import (binomial_ci, rollout_window, simulate_em, tuning_probe)
from robust_lapline.uncertainty import NoiseModel
from robust_lapline.vehicle import Car

X0 = np.array([20.0, 0.0, 0.0, 0.0, 0.0, 0.0])
INPUTS = np.tile([500.0, 0.0, 0.02], (4, 1))
DTS = np.full(4, 0.065)


def _run(seed, threads=1, M=5000):
    noise = NoiseModel.default()
    return simulate_em(X0, noise.P0_bar, INPUTS, DTS, Car(), noise.Q, M, [seed], threads=threads)


def test_same_seed_same_paths():
    a, _, _ = _run(3)
    b, _, _ = _run(3)
    assert np.array_equal(a, b)


def test_thread_count_does_not_change_samples():
    a, _, _ = _run(3, threads=1, M=9000)
    b, _, _ = _run(3, threads=4, M=9000)
    assert np.array_equal(a, b)


def test_different_seeds_differ():
    a, _, _ = _run(3)
    b, _, _ = _run(4)
    assert not np.array_equal(a, b)


def test_zero_noise_paths_are_deterministic():
    noise = NoiseModel.zero()
    end, _, _ = simulate_em(X0, noise.P0_bar, INPUTS, DTS, Car(), noise.Q, 10, [0])
    assert np.allclose(end, end[0])


def test_wilson_interval():
    lo, hi = binomial_ci(0, 100)
    assert lo == pytest.approx(0.0, abs=1e-15) and 0.03 < hi < 0.04
    lo, hi = binomial_ci(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)


def test_probe_vanishes_without_noise():
    rep = tuning_probe(Car(), NoiseModel.zero())
    assert rep.max_beta == 0.0


def test_probe_scales_with_square_root_of_q():
    base = NoiseModel(NoiseModel.default().Q, np.zeros((6, 6)))
    r1 = tuning_probe(Car(), base)
    r4 = tuning_probe(Car(), base.scaled(q_factor=4.0))
    assert r4.max_beta == pytest.approx(2.0 * r1.max_beta, rel=1e-9)


def test_default_noise_meets_probe_target():
    assert tuning_probe(Car(), NoiseModel.default()).max_beta <= 0.10


def test_rollout_checks_the_h_th_node(tmp_path):
    from robust_lapline.reference import Reference
    from robust_lapline import scenes
    tr = scenes.straight(200.0)
    n = 21
    s = np.linspace(0, 200, n)
    z = np.zeros(n)
    ref = Reference(s=s, x=s.copy(), y=z, psi=z, u=np.full(n, 20.0), v=z, r=z, n=z, chi=z,
                    t=s / 20.0, delta=z, X2a=z, X2b=z, beta_ref=z, beta_tlc=z, beta_flc1=z,
                    beta_flc2=z, closed=False)
    batch = rollout_window(ref, tr, Car(), 2, NoiseModel.default(), 500, 1, 4)
    assert batch.check_node == 6
    assert batch.rate("TLC") == 0.0
