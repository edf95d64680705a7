import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rvzhomotopy.cw import (
    CwModel,
    continuous_matrices,
    costate_transition,
    discretize,
    propagate,
    transition_matrix,
)

from conftest import NOMINAL_X0, rk4_transition


def test_double_integrator_when_n_is_zero():
    A, B = continuous_matrices(CwModel(n=0.0))
    expected = np.zeros((6, 6))
    expected[:3, 3:] = np.eye(3)
    np.testing.assert_array_equal(A, expected)


def test_continuous_matrix_entries():
    A, B = continuous_matrices(CwModel(n=1.06e-3))
    assert A[3, 0] == pytest.approx(3.3708e-6, rel=1e-12)
    assert A[3, 4] == pytest.approx(2.12e-3, rel=1e-12)
    assert A[4, 3] == pytest.approx(-2.12e-3, rel=1e-12)
    assert A[5, 2] == pytest.approx(-(1.06e-3) ** 2, rel=1e-12)
    assert np.count_nonzero(B) == 3
    np.testing.assert_array_equal(B[3:], np.eye(3))


@pytest.mark.parametrize("n", [0.0, 1.06e-3, 1e-2])
@pytest.mark.parametrize("dt", [0.1, 1.0, 10.0])
def test_discretize_matches_rk4_oracle(n, dt):
    m = CwModel(n=n)
    A, B = continuous_matrices(m)
    phi_ref, gam_ref = rk4_transition(A, B, dt)
    dm = discretize(m, dt)
    np.testing.assert_allclose(dm.phi, phi_ref, rtol=0, atol=1e-9)
    np.testing.assert_allclose(dm.gamma, gam_ref, rtol=0, atol=1e-9)


def test_small_step_limit():
    dm = discretize(CwModel(), 1e-9)
    np.testing.assert_allclose(dm.phi, np.eye(6), atol=1e-8)
    np.testing.assert_allclose(dm.gamma, 0.0, atol=1e-8)


def test_double_integrator_closed_form():
    dm = discretize(CwModel(n=0.0), 1.0)
    np.testing.assert_array_equal(dm.phi[:3, 3:], np.eye(3))
    np.testing.assert_array_equal(dm.gamma[3:], np.eye(3))
    np.testing.assert_array_equal(dm.gamma[:3], 0.5 * np.eye(3))


@pytest.mark.parametrize("dt", [0.0, -1.0, float("nan")])
def test_discretize_rejects_bad_step(dt):
    with pytest.raises(ValueError):
        discretize(CwModel(), dt)


def test_model_validation():
    with pytest.raises(ValueError):
        CwModel(n=-1.0)
    with pytest.raises(ValueError):
        CwModel(u_max=0.0)


def test_propagate_examples():
    dm = discretize(CwModel(n=0.0), 1.0)
    np.testing.assert_array_equal(propagate(np.zeros(6), np.zeros(3), dm), np.zeros(6))
    a = 3e-4
    np.testing.assert_allclose(propagate(np.zeros(6), [a, 0, 0], dm), [a / 2, 0, 0, a, 0, 0])


def test_nominal_state_800_unit_steps_match_one_long_step():
    m = CwModel()
    dm1 = discretize(m, 1.0)
    x = NOMINAL_X0.copy()
    for _ in range(800):
        x = propagate(x, np.zeros(3), dm1)
    x_long = propagate(NOMINAL_X0, np.zeros(3), discretize(m, 800.0))
    np.testing.assert_allclose(x, x_long, rtol=1e-10, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.01, 400.0), b=st.floats(0.01, 400.0),
       n=st.sampled_from([0.0, 1.06e-3, 1e-2]))
def test_semigroup(a, b, n):
    m = CwModel(n=n)
    lhs = discretize(m, a + b).phi
    rhs = discretize(m, a).phi @ discretize(m, b).phi
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(dt=st.floats(1e-3, 1e3), n=st.floats(0.0, 1e-2))
def test_origin_is_equilibrium(dt, n):
    dm = discretize(CwModel(n=n), dt)
    assert np.all(propagate(np.zeros(6), np.zeros(3), dm) == 0.0)


def test_out_of_plane_decoupling():
    dm = discretize(CwModel(), 1.0)
    x = np.array([0, 0, 1.3, 0, 0, -0.02])
    for _ in range(500):
        x = propagate(x, np.zeros(3), dm)
        assert x[0] == 0.0 and x[1] == 0.0 and x[3] == 0.0 and x[4] == 0.0


def test_phi_invertible_and_costate_transition_is_inverse_transpose():
    m = CwModel()
    for dt in (0.5, 1.0, 100.0):
        phi = transition_matrix(m.n, dt)
        assert abs(np.linalg.det(phi)) > 0.5
        np.testing.assert_allclose(costate_transition(m, dt), np.linalg.inv(phi).T, atol=1e-10)
