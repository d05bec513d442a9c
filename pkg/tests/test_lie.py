import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm

from helpers import GROUPS, expm_group, rand_element
from iekf import lie
from iekf.errors import ContractError, CutLocusError
from iekf.lie import SE23, SE23_R6, SO3, AlgebraVector, GroupElement, euclidean, skew

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)
group_st = st.sampled_from(GROUPS)


def coords(G, rng, scale=1.0):
    u = rng.normal(size=G.dim) * scale
    if G.factor is not None and np.linalg.norm(u[:3]) > 3.0:
        u[:3] *= 3.0 / np.linalg.norm(u[:3])
    return u


@given(group_st, st.integers(0, 2**31))
def test_log_exp_roundtrip(G, seed):
    u = coords(G, np.random.default_rng(seed))
    assert np.abs(G.log(G.exp(u)) - u).max() <= 1e-10


@given(group_st, st.integers(0, 2**31))
def test_exp_log_roundtrip(G, seed):
    X = rand_element(np.random.default_rng(seed), G)
    Y = G.exp(G.log(X))
    assert np.abs(Y.as_matrix() - X.as_matrix()).max() <= 1e-10


@given(group_st, st.integers(0, 2**31))
def test_exp_matches_matrix_exponential(G, seed):
    u = coords(G, np.random.default_rng(seed))
    X = G.exp(u)
    ref = expm_group(G, u)
    if G.factor is None:
        assert np.allclose(X.euclidean, ref, atol=1e-12)
    else:
        M, b = ref
        assert np.allclose(X.matrix, M, atol=1e-12)
        assert np.allclose(X.euclidean, b, atol=1e-12)


@given(arrays(float, 3, elements=st.floats(-1e-7, 1e-7)))
def test_so3_small_angle_branch(w):
    assert np.allclose(SO3.exp(w).matrix, expm(skew(w)), atol=1e-15)
    assert np.allclose(SO3.log(SO3.exp(w)), w, atol=1e-15)


def test_so3_exp_hand_value():
    R = SO3.exp([0.0, 0.0, np.pi / 2]).matrix
    assert np.allclose(R, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


def test_log_near_pi_recovers_axis():
    axis = np.array([1.0, 2.0, -2.0]) / 3.0
    u = (np.pi - 1e-4) * axis
    assert np.allclose(SO3.log(SO3.exp(u)), u, atol=1e-9)


def test_log_at_pi_raises_cut_locus():
    R = np.diag([1.0, -1.0, -1.0])
    with pytest.raises(CutLocusError):
        SO3.log(SO3.element(R))


@given(group_st, st.integers(0, 2**31))
def test_adjoint_homomorphism(G, seed):
    rng = np.random.default_rng(seed)
    X, Y = rand_element(rng, G), rand_element(rng, G)
    assert np.abs(G.adjoint(X @ Y) - G.adjoint(X) @ G.adjoint(Y)).max() <= 1e-10


@given(group_st, st.integers(0, 2**31))
def test_adjoint_is_conjugation(G, seed):
    rng = np.random.default_rng(seed)
    X = rand_element(rng, G)
    u = coords(G, rng)
    lhs = G.wedge(G.adjoint(X) @ u)
    M = X.as_matrix()
    assert np.abs(lhs - M @ G.wedge(u) @ np.linalg.inv(M)).max() <= 1e-10


@given(group_st, st.integers(0, 2**31))
def test_little_adjoint_is_bracket(G, seed):
    rng = np.random.default_rng(seed)
    u, w = coords(G, rng), coords(G, rng)
    A, B = G.wedge(u), G.wedge(w)
    assert np.abs(G.wedge(G.ad(u) @ w) - (A @ B - B @ A)).max() <= 1e-12


@given(group_st, st.integers(0, 2**31))
def test_wedge_vee_roundtrip(G, seed):
    u = coords(G, np.random.default_rng(seed))
    assert np.array_equal(G.vee(G.wedge(u)), u)


@pytest.mark.parametrize("G", GROUPS, ids=repr)
def test_exp_jacobians_against_finite_differences(G, rng):
    h = 1e-6
    for _ in range(10):
        u = coords(G, rng, 0.8)
        E0 = G.exp(u)
        JL = np.column_stack(
            [(G.log(E0.inv() @ G.exp(u + h * e)) - G.log(E0.inv() @ G.exp(u - h * e))) / (2 * h) for e in np.eye(G.dim)]
        )
        JR = np.column_stack(
            [(G.log(G.exp(u + h * e) @ E0.inv()) - G.log(G.exp(u - h * e) @ E0.inv())) / (2 * h) for e in np.eye(G.dim)]
        )
        assert np.abs(G.jac_left(u) - JL).max() <= 1e-5
        assert np.abs(G.jac_right(u) - JR).max() <= 1e-5


@given(group_st, st.integers(0, 2**31))
def test_jacobians_related_by_adjoint(G, seed):
    u = coords(G, np.random.default_rng(seed))
    assert np.abs(G.jac_right(u) - G.adjoint(G.exp(u)) @ G.jac_left(u)).max() <= 1e-10


def test_so3_closed_form_jacobians_match_series():
    rng = np.random.default_rng(3)
    for _ in range(20):
        w = rng.normal(size=3)
        series = lie._exp_series_jacobian(skew(w), -1.0)
        assert np.allclose(lie.so3_jac_right_literature(w), series, atol=1e-12)
        assert np.allclose(lie.so3_jac_left_literature(w) @ lie.so3_jac_left_literature_inv(w), np.eye(3), atol=1e-12)


def test_euclidean_group_is_additive():
    G = euclidean(3)
    a, b = G.exp([1.0, 2.0, 3.0]), G.exp([-1.0, 0.5, 0.0])
    assert np.allclose((a @ b).euclidean, [0.0, 2.5, 3.0])
    assert np.allclose(G.adjoint(a), np.eye(3))
    assert np.allclose(G.jac_left([1.0, 2.0, 3.0]), np.eye(3))


def test_inverse_and_identity(rng):
    for G in GROUPS:
        X = rand_element(rng, G)
        assert np.allclose((X @ X.inv()).as_matrix(), G.identity().as_matrix(), atol=1e-12)


def test_compose_across_groups_rejected():
    with pytest.raises(ContractError):
        SE23.identity() @ SE23_R6.identity()


def test_validate_rejects_non_rotation():
    with pytest.raises(ContractError):
        SO3.element(np.diag([1.0, 1.0, 2.0]))
    with pytest.raises(ContractError):
        SO3.element(np.full((3, 3), np.nan))


def test_wrong_coordinate_length_rejected():
    with pytest.raises(ContractError):
        SE23.exp(np.zeros(4))


def test_elements_are_immutable():
    X = SE23_R6.exp(np.ones(15) * 0.1)
    with pytest.raises(ValueError):
        X.matrix[0, 0] = 2.0
    assert isinstance(X, GroupElement)


def test_functional_api_matches_methods(rng):
    u = coords(SE23_R6, rng)
    a = AlgebraVector(SE23_R6, u)
    X = lie.exp(a)
    assert np.allclose(lie.log(X).coords, u)
    assert np.allclose(lie.adjoint_matrix(X), SE23_R6.adjoint(X))
    assert np.allclose(lie.little_adjoint(a), SE23_R6.ad(u))
    assert np.allclose(lie.exp_jacobian_left(a), SE23_R6.jac_left(u))
    assert np.allclose(lie.exp_jacobian_right(a), SE23_R6.jac_right(u))
    assert np.allclose(lie.vee(SE23_R6, lie.wedge(a)).coords, u)
    assert np.allclose(lie.compose(X, lie.inverse(X)).as_matrix(), SE23_R6.identity().as_matrix())
