import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.spatial.transform import Rotation

import helpers as H
from iekf import filters as F
from iekf import ins
from iekf.errors import ContractError
from iekf.lie import SE23, SE23_R6, SO3, skew, so3_exp

G0 = ins.GRAVITY


def state(R, v=(0, 0, 0), p=(0, 0, 0), bg=(0, 0, 0), ba=(0, 0, 0)):
    return ins.InsState(np.asarray(R, float), np.asarray(p, float), np.asarray(v, float),
                        np.asarray(bg, float), np.asarray(ba, float)).to_group()


def test_hover_is_an_equilibrium():
    X = state(np.eye(3), p=(1, 2, 3))
    assert np.array_equal(ins.ins_lambda(X, np.r_[0, 0, 0, -G0]), np.zeros(15))


def test_lambda_hand_value():
    # 90 degree roll, moving along x, small yaw rate, with biases
    Rx = np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]], float)
    X = state(Rx, v=(1, 0, 0), p=(5, 0, 0), bg=(0, 0, 0.1), ba=(0.2, 0, 0))
    lam = ins.ins_lambda(X, [0, 0, 0.3, 1.0, 0.0, 0.0])
    expected = np.zeros(15)
    expected[0:3] = [0, 0, 0.2]
    expected[3:6] = [0.8, -9.81, 0.0]
    expected[6:9] = [1, 0, 0]
    assert np.allclose(lam, expected, atol=1e-15)


def test_lambda_is_left_trivialised_vector_field(rng):
    for _ in range(10):
        X, u = H.rand_element(rng), H.rand_imu(rng)
        st = ins.InsState.from_group(X)
        w, a = u[:3] - st.bg, u[3:] - st.ba
        Xdot = np.zeros((5, 5))
        Xdot[:3, :3] = st.R @ skew(w)
        Xdot[:3, 3] = st.R @ a + G0
        Xdot[:3, 4] = st.v
        lam = ins.ins_lambda(X, u)
        assert np.abs(X.matrix @ SE23.wedge(lam[:9]) - Xdot).max() <= 1e-12
        assert not np.any(lam[9:])


def test_lambda_jacobian_vs_finite_differences(rng):
    for _ in range(10):
        X, u = H.rand_element(rng), H.rand_imu(rng)
        D = ins.ins_lambda_jacobian(X, u)
        assert np.abs(D - F.left_fd(lambda Y: ins.ins_lambda(Y, u), X)).max() <= 1e-6


def test_noise_routing():
    ups, qb = ins.ins_noise_map()
    assert ups.shape == (15, 12)
    assert np.count_nonzero(ups) == 12 and np.all(ups[ups != 0] == 1)
    assert not np.any(ups[6:9])
    Q = ups @ qb(1e-12, 1e-12, 0.1, 1e-12) @ ups.T
    big = np.abs(Q) > 1e-20
    assert np.diag(big)[9:12].all() and big.sum() == 3
    with pytest.raises(ContractError):
        qb(0.1, 0.0, 0.1, 0.1)


def test_position_action_axioms(rng):
    for _ in range(10):
        X, Y, z = H.rand_element(rng), H.rand_element(rng), rng.normal(size=3)
        assert np.allclose(ins.position_action(X, ins.position_action(Y, z)), ins.position_action(X @ Y, z))
        assert np.allclose(ins.position_action(SE23_R6.identity(), z), z)
        assert np.array_equal(ins.position_action(X, np.zeros(3)), X.matrix[:3, 4])


def test_left_invariant_output_matrix_vs_innovation(rng):
    meas = ins.ins_measurement_model(0.5)
    for _ in range(5):
        Xh = H.rand_element(rng)
        Xh_inv = Xh.inv()
        # pulled-back innovation for a true state Xh exp(e)
        fd = F.left_fd(lambda Y: ins.position_action(Xh_inv @ Y, np.zeros(3)), Xh)
        C = F.c_left_invariant(meas, Xh, F.Handedness.LEFT)
        assert np.abs(C - fd).max() <= 1e-6


def test_propagate_exact_vs_ode_solver(rng):
    R0 = H.rand_rotation(rng)
    v0, p0 = rng.normal(size=3), rng.normal(size=3)
    w, a, dt = np.array([1.5, -2.0, 0.7]), np.array([3.0, -1.0, 12.0]), 0.3

    def rhs(t, y):
        R = y[:9].reshape(3, 3)
        return np.concatenate([(R @ skew(w)).ravel(), R @ a + G0, y[9:12]])

    sol = solve_ivp(rhs, (0, dt), np.concatenate([R0.ravel(), v0, p0]), rtol=1e-12, atol=1e-13, method="DOP853")
    y = sol.y[:, -1]
    R1, v1, p1 = ins.propagate_exact(R0, v0, p0, w, a, dt)
    assert np.abs(R1 - y[:9].reshape(3, 3)).max() <= 1e-9
    assert np.abs(v1 - y[9:12]).max() <= 1e-9
    assert np.abs(p1 - y[12:]).max() <= 1e-9


def test_propagate_exact_small_rotation_branch():
    R0 = np.eye(3)
    R1, v1, p1 = ins.propagate_exact(R0, np.zeros(3), np.zeros(3), np.array([1e-12, 0, 0]), np.array([1.0, 0, 0]), 2.0)
    assert np.allclose(v1, [2.0, 0, 0] + 2.0 * G0)
    assert np.allclose(p1, [2.0, 0, 0] + 2.0 * G0)


def test_group_euler_step_local_error_is_second_order(rng):
    X, u = H.rand_element(rng, scale=0.5), H.rand_imu(rng)
    st = ins.InsState.from_group(X)

    def one_step_error(h):
        Xe = X @ SE23_R6.exp(h * ins.ins_lambda(X, u))
        R1, v1, p1 = ins.propagate_exact(st.R, st.v, st.p, u[:3] - st.bg, u[3:] - st.ba, h)
        M = Xe.matrix
        return max(np.abs(M[:3, :3] - R1).max(), np.abs(M[:3, 3] - v1).max(), np.abs(M[:3, 4] - p1).max())

    errs = [one_step_error(h) for h in (0.02, 0.01, 0.005)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


def test_stationary_gravity_cancellation(rng):
    R = H.rand_rotation(rng)
    p = np.array([1.0, 2.0, 3.0])
    a = -R.T @ G0
    Rk, vk, pk = R, np.zeros(3), p
    X = state(R, p=p)
    for _ in range(1000):
        Rk, vk, pk = ins.propagate_exact(Rk, vk, pk, np.zeros(3), a, 0.005)
        X = X @ SE23_R6.exp(0.005 * ins.ins_lambda(X, np.r_[0, 0, 0, a]))
    assert np.abs(pk - p).max() <= 1e-9 and np.abs(vk).max() <= 1e-9
    assert np.abs(X.matrix[:3, 4] - p).max() <= 1e-9


def test_state_roundtrip_and_contracts(rng):
    X = H.rand_element(rng)
    assert np.array_equal(ins.InsState.from_group(X).to_group().as_matrix(), X.as_matrix())
    with pytest.raises(ContractError):
        ins.InsState.from_group(SO3.exp([0.1, 0, 0]))
    with pytest.raises(ContractError):
        ins.ins_lambda(X, np.zeros(5))
    with pytest.raises(ContractError):
        ins.ins_measurement_model(0.0)


def test_imu_sample_input():
    s = ins.ImuSample(np.array([1.0, 2, 3]), np.array([4.0, 5, 6]), 0.1)
    X = SE23_R6.identity()
    assert np.array_equal(ins.ins_lambda(X, s), ins.ins_lambda(X, np.arange(1.0, 7)))


def test_filter_on_exact_data_tracks_truth():
    """Noise-free IMU and GNSS on a turning trajectory keep the estimate on the truth."""
    model, meas = ins.ins_system_model(1e-3, 1e-3, 1e-5, 1e-5), ins.ins_measurement_model(0.01)
    R, v, p = np.eye(3), np.array([2.0, 0, 0]), np.zeros(3)
    w, a = np.array([0, 0, 0.5]), np.array([0, 1.0, 0]) - G0
    X0 = state(R, v=v, p=p)
    s = F.initial_state(X0, 1e-4 * np.eye(15), F.Handedness.RIGHT)
    for k in range(200):
        R, v, p = ins.propagate_exact(R, v, p, w, a, 0.01)
        y = p if k % 10 == 9 else None
        s = F.step(s, model, [(np.r_[w, a], 0.01)], y, meas, F.Discrete())
    st = ins.InsState.from_group(s.ref)
    assert np.abs(st.p - p).max() <= 1e-9 and np.abs(st.R - R).max() <= 1e-9
