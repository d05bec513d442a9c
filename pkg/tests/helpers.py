"""Random instances and independent oracles shared by the test modules."""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from iekf import filters as F
from iekf import ins
from iekf.cgd import ConcentratedGaussian, Handedness, convert_handedness, log_likelihood
from iekf.lie import SE23, SE23_R6, SO3, euclidean, skew

GROUPS = [SO3, SE23, SE23_R6, euclidean(4)]


def rand_rotation(rng) -> np.ndarray:
    return Rotation.random(random_state=rng).as_matrix()


def rand_element(rng, G=SE23_R6, scale=1.0):
    """Random element with rotation angle below pi and moderate translations."""
    u = rng.normal(size=G.dim) * scale
    if G.factor is not None:
        w = u[:3]
        n = np.linalg.norm(w)
        if n > 2.5:
            u[:3] = w * (2.5 / n)
    return G.exp(u)


def rand_spd(rng, m, scale=1.0, cond=1e3) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.normal(size=(m, m)))
    ev = scale * np.exp(rng.uniform(0.0, np.log(cond), m)) / cond
    S = Q @ np.diag(ev) @ Q.T
    return 0.5 * (S + S.T)


def rand_imu(rng) -> np.ndarray:
    return np.concatenate([rng.normal(0, 0.5, 3), rng.normal(0, 1.0, 3) + [0, 0, 9.81]])


def ins_models(analytic=True):
    return ins.ins_system_model(0.05, 0.1, 1e-3, 1e-2, analytic=analytic), ins.ins_measurement_model(0.3, analytic)


def so3_model():
    """Attitude with a state-dependent rate ``omega + 0.2 R^T e3``; generic FD paths only."""
    e3 = np.array([0.0, 0.0, 1.0])
    return F.SystemModel(
        group=SO3,
        lam=lambda X, v: np.asarray(v) + 0.2 * X.matrix.T @ e3,
        upsilon=np.eye(3),
        q=0.01 * np.eye(3),
    )


def expm_group(G, u):
    """Group exponential via the matrix exponential of the wedge (oracle)."""
    W = G.wedge(u)
    E = expm(W)
    if G.factor is None:
        return E[:-1, -1]
    n = G.n
    M = E[:n, :n]
    b = E[n:-1, -1] if G.k else np.zeros(0)
    return M, b


# ---------------------------------------------------------------------------
# Independent finite-difference oracles for the error dynamics
# ---------------------------------------------------------------------------


def fd_a_left(model, X, v, step=1e-6):
    """Columns of ``d/ds [lam(X exp(s e)) - Ad_{exp(-s e)} lam(X)]``."""
    G = model.group
    lam0 = np.asarray(model.lam(X, v))
    cols = []
    for e in np.eye(G.dim):
        def f(s):
            return np.asarray(model.lam(X @ G.exp(s * e), v)) - G.adjoint(G.exp(-s * e)) @ lam0
        cols.append((f(step) - f(-step)) / (2 * step))
    return np.column_stack(cols)


def fd_a_right(model, X, v, step=1e-6):
    """Columns of ``d/ds [Ad_{X_s} lam(X_s) - Ad_{exp(s e)} Ad_X lam(X)]`` with ``X_s = exp(s e) X``."""
    G = model.group
    base = G.adjoint(X) @ np.asarray(model.lam(X, v))
    cols = []
    for e in np.eye(G.dim):
        def f(s):
            Xs = G.exp(s * e) @ X
            return G.adjoint(Xs) @ np.asarray(model.lam(Xs, v)) - G.adjoint(G.exp(s * e)) @ base
        cols.append((f(step) - f(-step)) / (2 * step))
    return np.column_stack(cols)


def fd_discrete_a_left(model, X, v, dt, step=1e-6):
    """``d/de log(X+^-1 Y exp(e) phi(Y exp(e)))`` at ``e = 0`` with ``X+ = X phi(X)``."""
    G = model.group
    Xp_inv = (X @ model.flow(X, v, dt)).inv()
    cols = []
    for e in np.eye(G.dim):
        def f(s):
            Y = X @ G.exp(s * e)
            return G.log(Xp_inv @ Y @ model.flow(Y, v, dt))
        cols.append((f(step) - f(-step)) / (2 * step))
    return np.column_stack(cols)


def fd_discrete_a_right(model, X, v, dt, step=1e-6):
    G = model.group
    Xp_inv = (X @ model.flow(X, v, dt)).inv()
    cols = []
    for e in np.eye(G.dim):
        def f(s):
            Y = G.exp(s * e) @ X
            return G.log(Y @ model.flow(Y, v, dt) @ Xp_inv)
        cols.append((f(step) - f(-step)) / (2 * step))
    return np.column_stack(cols)


def ins_a_left_closed_form(omega_hat, accel_hat) -> np.ndarray:
    """Hand-derived ``A_L`` for the INS model; depends on bias-corrected inputs only."""
    A = np.zeros((15, 15))
    W, Acc = skew(omega_hat), skew(accel_hat)
    A[0:3, 0:3] = -W
    A[0:3, 9:12] = -np.eye(3)
    A[3:6, 0:3] = -Acc
    A[3:6, 3:6] = -W
    A[3:6, 12:15] = -np.eye(3)
    A[6:9, 3:6] = np.eye(3)
    A[6:9, 6:9] = -W
    return A


def ins_a_right_closed_form(R, v, p, g=ins.GRAVITY) -> np.ndarray:
    """Hand-derived ``A_R`` for the INS model; independent of the inputs."""
    A = np.zeros((15, 15))
    A[3:6, 0:3] = skew(g)
    A[6:9, 3:6] = np.eye(3)
    A[0:3, 9:12] = -R
    A[3:6, 9:12] = -skew(v) @ R
    A[3:6, 12:15] = -R
    A[6:9, 9:12] = -skew(p) @ R
    return A


# ---------------------------------------------------------------------------
# Batch checks of the equivalence relations; each returns the worst error
# ---------------------------------------------------------------------------


def likelihood_gap(rng, n=200) -> float:
    worst = 0.0
    for _ in range(n):
        X = rand_element(rng)
        S = rand_spd(rng, 15, 0.1)
        left = ConcentratedGaussian(Handedness.LEFT, rng.normal(0, 0.1, 15), X, S)
        right = convert_handedness(left)
        # evaluation point drawn from the distribution itself
        g = X @ SE23_R6.exp(left.mu + np.linalg.cholesky(S) @ rng.standard_normal(15))
        worst = max(worst, abs(log_likelihood(left, g) - log_likelihood(right, g)))
    return worst


def predict_matrix_gap(rng, n=200) -> float:
    """``A_R`` against ``Ad (A_L + ad_lam) Ad^-1`` on random INS states and inputs."""
    model, _ = ins_models()
    G = model.group
    worst = 0.0
    for _ in range(n):
        X = rand_element(rng)
        v = rand_imu(rng)
        Ad = G.adjoint(X)
        rhs = Ad @ (F.a_left(model, X, v) + G.ad(model.lam(X, v))) @ np.linalg.inv(Ad)
        worst = max(worst, np.abs(F.a_right(model, X, v) - rhs).max())
    return worst


def posterior_gap(rng, n=200) -> float:
    """Worst equivalence gap after updating equivalent left/right priors."""
    from iekf.cgd import equivalence_gap

    _, meas = ins_models()
    worst = 0.0
    for _ in range(n):
        X = rand_element(rng)
        S = rand_spd(rng, 15, 0.5)
        sl = F.initial_state(X, S, Handedness.LEFT)
        sr = F.FilterState(convert_handedness(sl.dist), 0.0)
        y = X.matrix[:3, 4] + rng.normal(0, 1.0, 3)
        post_l = F.update(sl, y, meas)
        post_r = F.update(sr, y, meas)
        ref, mu, a = equivalence_gap(post_l.dist, post_r.dist)
        scale = max(1.0, np.abs(post_r.sigma).max())
        worst = max(worst, ref, mu, a, np.abs(
            SE23_R6.adjoint(X) @ post_l.sigma @ SE23_R6.adjoint(X).T - post_r.sigma
        ).max() / scale)
    return worst


def reset_jacobian_gap(rng, n=200) -> float:
    """``J_R`` against ``Ad_{X+} J_L Ad_{X-^-1}`` with ``X+ = X- exp(mu_L)``."""
    G = SE23_R6
    worst = 0.0
    for _ in range(n):
        Xm = rand_element(rng)
        mu_l = rng.normal(0, 0.3, 15)
        Xp = Xm @ G.exp(mu_l)
        JL = F.reset_jacobian(G, mu_l, Handedness.LEFT)
        JR = F.reset_jacobian(G, G.adjoint(Xm) @ mu_l, Handedness.RIGHT)
        worst = max(worst, np.abs(JR - G.adjoint(Xp) @ JL @ G.adjoint(Xm.inv())).max())
    return worst


def discrete_relation_gap(rng, n=200) -> float:
    """Discrete ``A_R = Ad_{X-} A_L Ad_X^-1`` and ``B_R = Ad_{X-} B_L``."""
    model, _ = ins_models()
    G = model.group
    worst = 0.0
    for _ in range(n):
        X = rand_element(rng)
        v = rand_imu(rng)
        dt = rng.uniform(1e-3, 0.1)
        Xm = X @ model.flow(X, v, dt)
        AdM = G.adjoint(Xm)
        AL = F.discrete_a_left(model, X, v, dt)
        AR = F.discrete_a_right(model, X, v, dt)
        worst = max(
            worst,
            np.abs(AR - AdM @ AL @ np.linalg.inv(G.adjoint(X))).max(),
            np.abs(F.discrete_b_right(model, Xm) - AdM @ F.discrete_b_left(model)).max(),
        )
    return worst


def discrete_run_gap(rng, steps=1000) -> float:
    """Worst equivalence gap along ``steps`` random discrete predict/update/reset cycles."""
    from iekf.cgd import equivalence_gap

    model, meas = ins_models()
    X = rand_element(rng, scale=0.5)
    S = rand_spd(rng, 15, 0.1, cond=1e2)
    sl = F.initial_state(X, S, Handedness.LEFT)
    sr = F.FilterState(convert_handedness(sl.dist), 0.0)
    worst = 0.0
    mode = F.Discrete()
    for k in range(steps):
        # specific force of a random world acceleration keeps the reference bounded
        R = sl.ref.matrix[:3, :3]
        u = np.concatenate([rng.normal(0, 0.5, 3), R.T @ (rng.normal(0, 1.0, 3) - ins.GRAVITY)])
        inputs = [(u, 0.005)]
        y = sl.ref.matrix[:3, 4] + rng.normal(0, 0.3, 3) if k % 2 == 0 else None
        sl = F.step(sl, model, inputs, y, meas, mode)
        sr = F.step(sr, model, inputs, y, meas, mode)
        worst = max(worst, *equivalence_gap(sl.dist, sr.dist))
    return worst


# PASS/FAIL lines collected by the acceptance module and echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []
