"""Compiled INS filter loop used by the Monte-Carlo harness.

This is a specialisation of :mod:`iekf.filters` to the GNSS-aided INS model
with explicit-Euler covariance sub-stepping.  The block-sparse structure of
``A_L`` / ``A_R`` is written out by hand; ``tests/test_kernels.py`` checks
the result against the generic implementation.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

OK = 0
NONFINITE = 1
SINGULAR = 2

_SMALL = 1e-6
_SERIES_TOL = 1e-14


@njit(cache=True)
def skew(w):
    W = np.zeros((3, 3))
    W[0, 1] = -w[2]
    W[0, 2] = w[1]
    W[1, 0] = w[2]
    W[1, 2] = -w[0]
    W[2, 0] = -w[1]
    W[2, 1] = w[0]
    return W


@njit(cache=True)
def _coeffs(theta):
    if theta < _SMALL:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    s = math.sin(theta)
    half = math.sin(0.5 * theta)
    return s / theta, 2.0 * half * half / theta**2, (theta - s) / theta**3


@njit(cache=True)
def so3_exp(w):
    theta = math.sqrt(w[0] ** 2 + w[1] ** 2 + w[2] ** 2)
    a, b, _ = _coeffs(theta)
    W = skew(w)
    return np.eye(3) + a * W + b * (W @ W)


@njit(cache=True)
def so3_jl(w):
    theta = math.sqrt(w[0] ** 2 + w[1] ** 2 + w[2] ** 2)
    _, b, c = _coeffs(theta)
    W = skew(w)
    return np.eye(3) + b * W + c * (W @ W)


@njit(cache=True)
def so3_jl_inv(w):
    theta = math.sqrt(w[0] ** 2 + w[1] ** 2 + w[2] ** 2)
    W = skew(w)
    if theta < _SMALL:
        d = 1.0 / 12.0 + theta * theta / 720.0
    else:
        d = 1.0 / theta**2 - (1.0 + math.cos(theta)) / (2.0 * theta * math.sin(theta))
    return np.eye(3) - 0.5 * W + d * (W @ W)


@njit(cache=True)
def so3_angle(R):
    sx = R[2, 1] - R[1, 2]
    sy = R[0, 2] - R[2, 0]
    sz = R[1, 0] - R[0, 1]
    s = 0.5 * math.sqrt(sx * sx + sy * sy + sz * sz)
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    return math.atan2(s, c)


@njit(cache=True)
def so3_log(R):
    theta = so3_angle(R)
    out = np.empty(3)
    out[0] = R[2, 1] - R[1, 2]
    out[1] = R[0, 2] - R[2, 0]
    out[2] = R[1, 0] - R[0, 1]
    if theta < _SMALL:
        return out * (0.5 + theta * theta / 12.0)
    if theta > math.pi - 1e-2:
        B = 0.5 * (R + R.T) - math.cos(theta) * np.eye(3)
        k = 0
        for i in range(1, 3):
            if B[i, i] > B[k, k]:
                k = i
        axis = B[:, k].copy()
        nrm = math.sqrt(axis[0] ** 2 + axis[1] ** 2 + axis[2] ** 2)
        axis /= nrm
        if axis[0] * out[0] + axis[1] * out[1] + axis[2] * out[2] < 0.0:
            axis = -axis
        return theta * axis
    return out * (0.5 * theta / math.sin(theta))


@njit(cache=True)
def ad_nav(u):
    """9x9 ``ad`` of SE_2(3) coordinates ``(omega, nu, rho)``."""
    A = np.zeros((9, 9))
    W = skew(u[0:3])
    A[0:3, 0:3] = W
    A[3:6, 3:6] = W
    A[6:9, 6:9] = W
    A[3:6, 0:3] = skew(u[3:6])
    A[6:9, 0:3] = skew(u[6:9])
    return A


@njit(cache=True)
def adjoint(R, v, p):
    """15x15 ``Ad_X`` on SE_2(3) x R^6."""
    A = np.eye(15)
    A[0:3, 0:3] = R
    A[3:6, 3:6] = R
    A[6:9, 6:9] = R
    A[3:6, 0:3] = skew(v) @ R
    A[6:9, 0:3] = skew(p) @ R
    return A


@njit(cache=True)
def exp_jacobian(mu, sign):
    """``sum_k sign^k ad^k/(k+1)!`` on the nav block, identity on biases."""
    ad = ad_nav(mu)
    J = np.eye(15)
    out = np.eye(9)
    term = np.eye(9)
    for k in range(1, 200):
        term = (sign / (k + 1)) * (term @ ad)
        out += term
        if np.abs(term).max() < _SERIES_TOL:
            break
    J[0:9, 0:9] = out
    return J


@njit(cache=True)
def se23_exp(mu):
    R = so3_exp(mu[0:3])
    V = so3_jl(mu[0:3])
    return R, V @ mu[3:6], V @ mu[6:9]


@njit(cache=True)
def log_product(R, v, p, b):
    """Coordinates of ``(R, v, p, b)`` on SE_2(3) x R^6."""
    out = np.empty(15)
    w = so3_log(R)
    Vi = so3_jl_inv(w)
    out[0:3] = w
    out[3:6] = Vi @ v
    out[6:9] = Vi @ p
    out[9:15] = b
    return out


@njit(cache=True)
def _propagate_cov_left(S, AS, w, acc, qdiag, h):
    """One explicit-Euler step of the left Riccati equation (``A_L`` input-only)."""
    w0, w1, w2 = w[0], w[1], w[2]
    a0, a1, a2 = acc[0], acc[1], acc[2]
    for j in range(15):
        # -w^ x for a column x: -(w cross x)
        x0, x1, x2 = S[0, j], S[1, j], S[2, j]
        y0, y1, y2 = S[3, j], S[4, j], S[5, j]
        z0, z1, z2 = S[6, j], S[7, j], S[8, j]
        AS[0, j] = -(w1 * x2 - w2 * x1) - S[9, j]
        AS[1, j] = -(w2 * x0 - w0 * x2) - S[10, j]
        AS[2, j] = -(w0 * x1 - w1 * x0) - S[11, j]
        AS[3, j] = -(a1 * x2 - a2 * x1) - (w1 * y2 - w2 * y1) - S[12, j]
        AS[4, j] = -(a2 * x0 - a0 * x2) - (w2 * y0 - w0 * y2) - S[13, j]
        AS[5, j] = -(a0 * x1 - a1 * x0) - (w0 * y1 - w1 * y0) - S[14, j]
        AS[6, j] = y0 - (w1 * z2 - w2 * z1)
        AS[7, j] = y1 - (w2 * z0 - w0 * z2)
        AS[8, j] = y2 - (w0 * z1 - w1 * z0)
    _euler_apply(S, AS, h)
    for i in range(15):
        S[i, i] += h * qdiag[i]


@njit(cache=True)
def _propagate_cov_right(S, AS, C1, R, v, p, g, qdiag, h):
    """One explicit-Euler step of the right Riccati equation."""
    # C1 = [R; v^R; p^R], the image of the gyro channel under Ad_X
    for c in range(3):
        r0, r1, r2 = R[0, c], R[1, c], R[2, c]
        C1[0, c] = r0
        C1[1, c] = r1
        C1[2, c] = r2
        C1[3, c] = v[1] * r2 - v[2] * r1
        C1[4, c] = v[2] * r0 - v[0] * r2
        C1[5, c] = v[0] * r1 - v[1] * r0
        C1[6, c] = p[1] * r2 - p[2] * r1
        C1[7, c] = p[2] * r0 - p[0] * r2
        C1[8, c] = p[0] * r1 - p[1] * r0
    g0, g1, g2 = g[0], g[1], g[2]
    for j in range(15):
        x0, x1, x2 = S[0, j], S[1, j], S[2, j]
        b0, b1, b2 = S[9, j], S[10, j], S[11, j]
        for i in range(9):
            AS[i, j] = -(C1[i, 0] * b0 + C1[i, 1] * b1 + C1[i, 2] * b2)
        AS[3, j] += (g1 * x2 - g2 * x1) - (R[0, 0] * S[12, j] + R[0, 1] * S[13, j] + R[0, 2] * S[14, j])
        AS[4, j] += (g2 * x0 - g0 * x2) - (R[1, 0] * S[12, j] + R[1, 1] * S[13, j] + R[1, 2] * S[14, j])
        AS[5, j] += (g0 * x1 - g1 * x0) - (R[2, 0] * S[12, j] + R[2, 1] * S[13, j] + R[2, 2] * S[14, j])
        AS[6, j] += S[3, j]
        AS[7, j] += S[4, j]
        AS[8, j] += S[5, j]
    _euler_apply(S, AS, h)
    qg = h * qdiag[0]
    qa = h * qdiag[3]
    for i in range(9):
        for j in range(i, 9):
            acc = qg * (C1[i, 0] * C1[j, 0] + C1[i, 1] * C1[j, 1] + C1[i, 2] * C1[j, 2])
            if i >= 3 and i < 6 and j >= 3 and j < 6:
                acc += qa * (R[i - 3, 0] * R[j - 3, 0] + R[i - 3, 1] * R[j - 3, 1] + R[i - 3, 2] * R[j - 3, 2])
            S[i, j] += acc
            if j != i:
                S[j, i] += acc
    for i in range(9, 15):
        S[i, i] += h * qdiag[i]


@njit(cache=True)
def _euler_apply(S, AS, h):
    # S += h (AS + AS^T); AS has zero bias rows
    for i in range(9):
        for j in range(i, 9):
            d = h * (AS[i, j] + AS[j, i])
            S[i, j] += d
            if j != i:
                S[j, i] += d
        for j in range(9, 15):
            d = h * AS[i, j]
            S[i, j] += d
            S[j, i] += d


@njit(cache=True)
def _move_reference(R, v, p, E, J, acc, g):
    """In place ``X <- X exp(h lam)`` with ``E = Exp(w h)`` and ``J = h J_l(w h)``."""
    n0 = acc[0] + R[0, 0] * g[0] + R[1, 0] * g[1] + R[2, 0] * g[2]
    n1 = acc[1] + R[0, 1] * g[0] + R[1, 1] * g[1] + R[2, 1] * g[2]
    n2 = acc[2] + R[0, 2] * g[0] + R[1, 2] * g[1] + R[2, 2] * g[2]
    q0 = R[0, 0] * v[0] + R[1, 0] * v[1] + R[2, 0] * v[2]
    q1 = R[0, 1] * v[0] + R[1, 1] * v[1] + R[2, 1] * v[2]
    q2 = R[0, 2] * v[0] + R[1, 2] * v[1] + R[2, 2] * v[2]
    jn0 = J[0, 0] * n0 + J[0, 1] * n1 + J[0, 2] * n2
    jn1 = J[1, 0] * n0 + J[1, 1] * n1 + J[1, 2] * n2
    jn2 = J[2, 0] * n0 + J[2, 1] * n1 + J[2, 2] * n2
    jr0 = J[0, 0] * q0 + J[0, 1] * q1 + J[0, 2] * q2
    jr1 = J[1, 0] * q0 + J[1, 1] * q1 + J[1, 2] * q2
    jr2 = J[2, 0] * q0 + J[2, 1] * q1 + J[2, 2] * q2
    for i in range(3):
        r0, r1, r2 = R[i, 0], R[i, 1], R[i, 2]
        v[i] += r0 * jn0 + r1 * jn1 + r2 * jn2
        p[i] += r0 * jr0 + r1 * jr1 + r2 * jr2
        R[i, 0] = r0 * E[0, 0] + r1 * E[1, 0] + r2 * E[2, 0]
        R[i, 1] = r0 * E[0, 1] + r1 * E[1, 1] + r2 * E[2, 1]
        R[i, 2] = r0 * E[0, 2] + r1 * E[1, 2] + r2 * E[2, 2]


@njit(cache=True)
def _all_finite(a):
    for x in a.ravel():
        if not np.isfinite(x):
            return False
    return True


@njit(cache=True, nogil=True)
def run_ins_filter(
    gyro,
    accel,
    gnss,
    ratio,
    dt,
    substeps,
    right,
    do_reset,
    R0,
    v0,
    p0,
    b0,
    S0,
    qdiag,
    Rmeas,
    g,
    truth_R,
    truth_v,
    truth_p,
    truth_b,
):
    """Run one L- or R-IEKF over an IMU record with a GNSS update every ``ratio`` samples.

    Returns per-epoch (post-reset) references, covariances, the posterior
    offset expressed in right coordinates, block errors against the truth,
    NEES and a status code.
    """
    K = gyro.shape[0]
    M = gnss.shape[0]
    R = R0.copy()
    v = v0.copy()
    p = p0.copy()
    b = b0.copy()
    S = S0.copy()
    out_R = np.zeros((M, 3, 3))
    out_v = np.zeros((M, 3))
    out_p = np.zeros((M, 3))
    out_b = np.zeros((M, 6))
    out_S = np.zeros((M, 15, 15))
    out_mu = np.zeros((M, 15))
    errs = np.zeros((M, 5))
    nees = np.zeros(M)
    h = dt / substeps
    AS = np.zeros((9, 15))
    C1 = np.zeros((9, 3))
    m = 0
    for k in range(K):
        w = gyro[k] - b[0:3]
        acc = accel[k] - b[3:6]
        E = so3_exp(w * h)
        J = so3_jl(w * h) * h
        for _ in range(substeps):
            if right:
                _propagate_cov_right(S, AS, C1, R, v, p, g, qdiag, h)
            else:
                _propagate_cov_left(S, AS, w, acc, qdiag, h)
            _move_reference(R, v, p, E, J, acc, g)
        if (k + 1) % ratio != 0 or m >= M:
            continue
        # left-invariant GNSS update with pseudo-measurement d = R^T (y - p)
        Rt = R.T
        d = Rt @ (gnss[m] - p)
        C = np.zeros((3, 15))
        if right:
            C[:, 0:3] = -Rt @ skew(p)
            C[:, 6:9] = Rt
        else:
            C[:, 6:9] = np.eye(3)
        SC = S @ C.T
        Sinn = C @ SC + Rt @ Rmeas @ R
        if not _all_finite(Sinn) or abs(np.linalg.det(Sinn)) == 0.0:
            return out_R, out_v, out_p, out_b, out_S, out_mu, errs, nees, SINGULAR
        Kg = np.linalg.solve(Sinn, SC.T).T
        mu = Kg @ d
        S = S - Kg @ SC.T
        S = 0.5 * (S + S.T)
        if right:
            out_mu[m] = mu
        else:
            out_mu[m] = adjoint(R, v, p) @ mu
        if np.linalg.norm(mu[0:3]) >= math.pi - 1e-9:
            return out_R, out_v, out_p, out_b, out_S, out_mu, errs, nees, NONFINITE
        dR, dv, dp = se23_exp(mu)
        if right:
            R, v, p = dR @ R, dR @ v + dv, dR @ p + dp
        else:
            R, v, p = R @ dR, v + R @ dv, p + R @ dp
        b = b + mu[9:15]
        if do_reset:
            Jr = exp_jacobian(mu, 1.0 if right else -1.0)
            S = Jr @ S @ Jr.T
            S = 0.5 * (S + S.T)
        if not (_all_finite(S) and _all_finite(R) and _all_finite(v) and _all_finite(p)):
            return out_R, out_v, out_p, out_b, out_S, out_mu, errs, nees, NONFINITE
        out_R[m] = R
        out_v[m] = v
        out_p[m] = p
        out_b[m] = b
        out_S[m] = S
        # errors against truth; NEES in this filter's own coordinates
        Rtr = truth_R[m]
        errs[m, 0] = so3_angle(R.T @ Rtr)
        errs[m, 1] = np.linalg.norm(truth_p[m] - p)
        errs[m, 2] = np.linalg.norm(truth_v[m] - v)
        errs[m, 3] = np.linalg.norm(truth_b[m, 0:3] - b[0:3])
        errs[m, 4] = np.linalg.norm(truth_b[m, 3:6] - b[3:6])
        if right:
            Re = Rtr @ R.T
            eps = log_product(Re, truth_v[m] - Re @ v, truth_p[m] - Re @ p, truth_b[m] - b)
        else:
            Rt = R.T
            eps = log_product(Rt @ Rtr, Rt @ (truth_v[m] - v), Rt @ (truth_p[m] - p), truth_b[m] - b)
        nees[m] = eps @ np.linalg.solve(S, eps)
        m += 1
    return out_R, out_v, out_p, out_b, out_S, out_mu, errs, nees, OK


@njit(cache=True)
def _airm(A, B):
    # generalized eigenvalues of (B, A) through the Cholesky factor of A
    L = np.linalg.cholesky(0.5 * (A + A.T))
    Li = np.linalg.solve(L, np.eye(A.shape[0]))
    M = Li @ (0.5 * (B + B.T)) @ Li.T
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))
    acc = 0.0
    for x in lam:
        if x <= 0.0:
            return np.inf
        acc += math.log(x) ** 2
    return math.sqrt(acc)


@njit(cache=True, nogil=True)
def pair_gaps(RL, vL, pL, bL, SL, muL, RR, vR, pR, bR, SR, muR):
    """Per-epoch gaps between a left and a right run: rot (rad), pos, vel, bias, mu, AIRM."""
    M = RL.shape[0]
    out = np.zeros((M, 6))
    for m in range(M):
        out[m, 0] = so3_angle(RL[m].T @ RR[m])
        out[m, 1] = np.linalg.norm(pL[m] - pR[m])
        out[m, 2] = np.linalg.norm(vL[m] - vR[m])
        out[m, 3] = np.linalg.norm(bL[m] - bR[m])
        out[m, 4] = np.linalg.norm(muL[m] - muR[m])
        Rt = RR[m].T
        Ad = adjoint(Rt, -Rt @ vR[m], -Rt @ pR[m])
        out[m, 5] = _airm(SL[m], Ad @ SR[m] @ Ad.T)
    return out
