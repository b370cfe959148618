import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm, solve_continuous_lyapunov

from robust_lapline.errors import ConfigError, CovarianceError
from robust_lapline.uncertainty import (NoiseModel, affine_maps, apply_map, lyapunov_operator,
                                        propagate_covariance, replicas_from_maps)


def _stable(rng, n=6):
    A = rng.standard_normal((n, n))
    return A - (np.max(np.linalg.eigvals(A).real) + 1.0) * np.eye(n)


def test_lyapunov_operator_matches_matrix_form():
    rng = np.random.default_rng(0)
    A, P = rng.standard_normal((6, 6)), rng.standard_normal((6, 6))
    lhs = (lyapunov_operator(A) @ P.reshape(-1)).reshape(6, 6)
    assert np.allclose(lhs, A @ P + P @ A.T)


def test_constant_jacobian_against_matrix_exponential():
    rng = np.random.default_rng(1)
    A = _stable(rng)
    B = rng.standard_normal((6, 6))
    Q = B @ B.T
    P_inf = solve_continuous_lyapunov(A, -Q)
    P0 = np.eye(6)
    t = 0.3
    E = expm(A * t)
    exact = E @ (P0 - P_inf) @ E.T + P_inf
    got = propagate_covariance(P0, A, Q, t, substeps=200)
    assert np.allclose(got, exact, rtol=1e-8, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), dt=st.floats(0.01, 0.2))
def test_propagation_keeps_psd_and_symmetry(seed, dt):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((6, 6))
    B = rng.standard_normal((6, 6))
    P = propagate_covariance(B @ B.T, A, np.eye(6) * 0.1, dt)
    assert np.allclose(P, P.T)
    assert np.linalg.eigvalsh(P).min() > -1e-9 * np.abs(P).max()


def test_affine_map_is_linear_in_p():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((1, 1, 6, 6))
    M, c, _ = affine_maps(A, np.array([0.0]), np.array([0.1]), np.eye(6))
    P1, P2 = np.eye(6), np.diag(np.arange(1.0, 7.0))
    lhs = apply_map(M[0], c[0], P1 + P2) + c[0].reshape(6, 6)
    rhs = apply_map(M[0], c[0], P1) + apply_map(M[0], c[0], P2)
    assert np.allclose(lhs, rhs)


def test_replicas_reset_and_chain():
    n, H = 8, 3
    M = np.tile(np.eye(36), (n, 1, 1))
    c = np.tile(np.eye(6).reshape(-1), (n, 1))
    reps = replicas_from_maps(M, c, 0.5 * np.eye(6), H)
    assert reps.P.shape == (n, H + 1, 6, 6)
    for j in range(H + 1):
        assert np.allclose(reps.P[:, j], (0.5 + j) * np.eye(6))
    with pytest.raises(ConfigError):
        replicas_from_maps(M, c, np.eye(6), n)


def test_zero_noise_gives_zero_replicas():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((5, 1, 6, 6))
    noise = NoiseModel.zero()
    M, c, _ = affine_maps(A, np.array([0.0]), np.full(5, 0.05), noise.Q)
    reps = replicas_from_maps(M, c, noise.P0_bar, 2)
    assert np.all(reps.P == 0.0)


def test_negative_definite_noise_rejected():
    with pytest.raises(CovarianceError):
        NoiseModel(-np.eye(6), np.zeros((6, 6)))
