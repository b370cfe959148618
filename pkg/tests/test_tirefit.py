import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_lapline.errors import SchemaError
from robust_lapline.telemetry import TelemetryLog
from robust_lapline.tirefit import (AxleTrainingSet, assemble_training, fit_axle, gauge_transform,
                                    identifiable_combinations, synthetic_training,
                                    write_fit_report)
from robust_lapline.vehicle import TIRE_FRONT, TIRE_REAR, TIRE_START, axle_lateral_force


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(0.3, 3.0), alpha=st.floats(-0.3, 0.3), fz=st.floats(2000.0, 18000.0))
def test_gauge_transform_leaves_forces_unchanged(lam, alpha, fz):
    q = gauge_transform(TIRE_FRONT, lam)
    assert axle_lateral_force(alpha, fz, q) == pytest.approx(
        axle_lateral_force(alpha, fz, TIRE_FRONT), rel=1e-9, abs=1e-9)
    a, b = identifiable_combinations(q), identifiable_combinations(TIRE_FRONT)
    assert all(a[k] == pytest.approx(b[k], rel=1e-9, abs=1e-15) for k in a)


@pytest.mark.parametrize("truth", [TIRE_FRONT, TIRE_REAR])
def test_noiseless_fit_recovers_invariants(truth):
    rep = fit_axle(synthetic_training(truth, seed=1), TIRE_START, gtol=1e-14)
    assert rep.converged
    got, want = identifiable_combinations(rep.p_hat), identifiable_combinations(truth)
    for k in want:
        assert got[k] == pytest.approx(want[k], rel=1e-4), k
    assert rep.residual_rms < 1e-3


def test_pinned_reference_load_recovers_all_parameters():
    start = TIRE_START.as_array()
    start[0] = TIRE_FRONT.F_z0
    from robust_lapline.vehicle import AxleTireParams
    rep = fit_axle(synthetic_training(TIRE_FRONT, seed=2), AxleTireParams.from_array(start),
                   fixed=("F_z0",), gtol=1e-14)
    assert np.allclose(rep.p_hat.as_array(), TIRE_FRONT.as_array(), rtol=1e-4)


def test_noisy_fit_predicts_forces():
    train = synthetic_training(TIRE_FRONT, seed=4, noise=0.02)
    rep = fit_axle(train, TIRE_START)
    alpha = np.linspace(-0.12, 0.12, 50)
    fz = np.full(50, 9000.0)
    err = axle_lateral_force(alpha, fz, rep.p_hat) - axle_lateral_force(alpha, fz, TIRE_FRONT)
    assert np.max(np.abs(err)) < 0.02 * np.max(np.abs(train.Fy))


def test_cost_history_decreases():
    rep = fit_axle(synthetic_training(TIRE_REAR, seed=3, noise=0.01), TIRE_START)
    assert np.all(np.diff(rep.cost_history) <= 0)


def test_assemble_training_combines_wheels():
    n = 20
    ch = {"t": np.arange(n) * 0.01}
    ch.update({"alpha_fl": np.full(n, 0.02), "alpha_fr": np.full(n, 0.04),
               "fz_fl": np.full(n, 4000.0), "fz_fr": np.full(n, 5000.0),
               "fy_fl": np.full(n, 1000.0), "fy_fr": np.full(n, 1500.0)})
    ch["fz_fl"][:3] = 20.0
    ch["fz_fr"][:3] = 20.0
    train = assemble_training(TelemetryLog(ch), "front")
    assert len(train) == n - 3
    assert train.alpha[0] == pytest.approx(0.03)
    assert train.Fz[0] == 9000.0 and train.Fy[0] == 2500.0


def test_training_set_rejects_too_few_samples():
    with pytest.raises(SchemaError):
        AxleTrainingSet(np.zeros(3), np.ones(3), np.zeros(3))


def test_fit_report_lists_every_parameter(tmp_path):
    rep = fit_axle(synthetic_training(TIRE_FRONT, seed=0), TIRE_START)
    path = tmp_path / "fit.txt"
    write_fit_report(path, rep, "front")
    text = path.read_text()
    for name in ("F_z0", "p_Cy1", "p_Ky2", "residual_rms", "p_Ky1*F_z0"):
        assert name in text
