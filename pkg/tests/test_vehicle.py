import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_lapline.errors import DomainError, WheelLiftError
from robust_lapline.vehicle import (TIRE_FRONT, TIRE_REAR, TIRE_START, Car, axle_forces,
                                    axle_lateral_force, axle_lateral_force_dalpha,
                                    axle_lateral_force_dparams, axle_saturation,
                                    loads_from_inputs, mf_coefficients, vertical_loads)
from oracles import central_difference


@settings(max_examples=100, deadline=None)
@given(alpha=st.floats(-0.5, 0.5), fz=st.floats(1000.0, 20000.0))
def test_magic_formula_is_odd(alpha, fz):
    for p in (TIRE_FRONT, TIRE_REAR):
        assert axle_lateral_force(-alpha, fz, p) == pytest.approx(
            -axle_lateral_force(alpha, fz, p), abs=1e-9)


def test_cornering_stiffness_matches_bcd():
    fz = 9000.0
    D, C, B, E = mf_coefficients(fz, TIRE_FRONT)
    assert axle_lateral_force_dalpha(0.0, fz, TIRE_FRONT) == pytest.approx(B * C * D, rel=1e-9)


def test_peak_force_equals_d():
    fz = 9000.0
    alpha = np.linspace(0.0, 0.5, 20001)
    peak = axle_lateral_force(alpha, fz, TIRE_FRONT).max()
    D = mf_coefficients(fz, TIRE_FRONT)[0]
    assert peak == pytest.approx(D, rel=1e-6)


def test_parameter_gradient_against_differences():
    alpha = np.linspace(-0.2, 0.2, 9)
    fz = np.linspace(4000, 15000, 9)
    J = axle_lateral_force_dparams(alpha, fz, TIRE_FRONT)
    p0 = TIRE_FRONT.as_array()
    from robust_lapline.vehicle import AxleTireParams
    J_fd = central_difference(
        lambda p: axle_lateral_force(alpha, fz, AxleTireParams.from_array(p)), p0,
        1e-6 * np.abs(p0))
    assert np.allclose(J, J_fd, rtol=1e-6, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(F=st.floats(-20000.0, 9000.0))
def test_load_transfer_conserves_weight(F):
    car = Car()
    Z1, Z2 = loads_from_inputs(max(F, 0.0), min(F, 0.0), car.vp)
    assert Z1 + Z2 == pytest.approx(car.vp.m * car.vp.g)


def test_braking_shifts_load_forward():
    car = Car()
    Zs = loads_from_inputs(0.0, 0.0, car.vp)
    Zb = loads_from_inputs(0.0, -10000.0, car.vp)
    assert Zb[0] > Zs[0] and Zb[1] < Zs[1]


def test_wheel_lift_detected():
    car = Car()
    with pytest.raises(WheelLiftError):
        vertical_loads([20, 0, 0, 0, 0, 0], [0.0, -1e6, 0.0], car.vp)


def test_saturation_of_pure_braking():
    car = Car()
    f = axle_forces(20.0, 0.0, 0.0, 0.0, -5000.0, 0.0, car)
    expected = (0.6 * 5000.0 / 1.4) ** 2 / f["Z1"] ** 2
    assert f["S1"] == pytest.approx(expected)
    assert axle_saturation([20, 0, 0, 0, 0, 0], [0, -5000.0, 0], car, 1) == pytest.approx(expected)


def test_reverse_speed_rejected():
    with pytest.raises(DomainError):
        axle_saturation([-1.0, 0, 0, 0, 0, 0], [0, 0, 0], Car(), 1)


def test_starting_values_are_valid():
    assert TIRE_START.validate() == []
