"""GNSS-aided inertial navigation on SE_2(3) x R^6.

Flat, non-rotating Earth::

    R' = R (omega - b_omega)^,   v' = R (a - b_a) + g,   p' = v,
    b_omega' = tau_omega,        b_a' = tau_a

State coordinates follow :mod:`iekf.lie`: ``(phi, nu, rho, b_omega, b_a)``.
Inputs to the system model are the stacked IMU reading ``(omega, a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .filters import MeasurementKind, MeasurementModel, SystemModel
from .lie import (
    SE23_R6,
    SMALL_ANGLE,
    GroupElement,
    skew,
    so3_exp,
    so3_jac_left_literature,
)

GRAVITY = np.array([0.0, 0.0, -9.81])

# block slices in algebra coordinates
ROT = slice(0, 3)
VEL = slice(3, 6)
POS = slice(6, 9)
BG = slice(9, 12)
BA = slice(12, 15)


@dataclass(frozen=True, eq=False)
class InsState:
    R: np.ndarray
    p: np.ndarray
    v: np.ndarray
    bg: np.ndarray = np.zeros(3)
    ba: np.ndarray = np.zeros(3)

    def to_group(self) -> GroupElement:
        M = np.eye(5)
        M[:3, :3] = self.R
        M[:3, 3] = self.v
        M[:3, 4] = self.p
        return GroupElement(SE23_R6, M, np.concatenate([self.bg, self.ba]).astype(float))

    @classmethod
    def from_group(cls, X: GroupElement) -> "InsState":
        if X.group != SE23_R6:
            raise ContractError("INS states live on SE_2(3) x R^6")
        M, b = X.matrix, X.euclidean
        return cls(
            R=np.array(M[:3, :3]),
            p=np.array(M[:3, 4]),
            v=np.array(M[:3, 3]),
            bg=np.array(b[:3]),
            ba=np.array(b[3:]),
        )


@dataclass(frozen=True)
class ImuSample:
    omega: np.ndarray
    accel: np.ndarray
    timestamp: float

    def as_input(self) -> np.ndarray:
        return np.concatenate([self.omega, self.accel])


@dataclass(frozen=True)
class GnssSample:
    position: np.ndarray
    timestamp: float


def _input(u) -> np.ndarray:
    if isinstance(u, ImuSample):
        return u.as_input()
    u = np.asarray(u, dtype=float)
    if u.shape != (6,):
        raise ContractError("IMU input must be (omega, accel) of length 6")
    return u


def ins_lambda(X: GroupElement, u, gravity=GRAVITY) -> np.ndarray:
    """Left trivialisation ``X^-1 f_u(X)`` in algebra coordinates."""
    u = _input(u)
    M, b = X.matrix, X.euclidean
    Rt = M[:3, :3].T
    out = np.zeros(15)
    out[ROT] = u[:3] - b[:3]
    out[VEL] = u[3:] - b[3:] + Rt @ gravity
    out[POS] = Rt @ M[:3, 3]
    return out


def ins_lambda_jacobian(X: GroupElement, u, gravity=GRAVITY) -> np.ndarray:
    """``D_X lam . DL_X`` for :func:`ins_lambda`."""
    M = X.matrix
    Rt = M[:3, :3].T
    D = np.zeros((15, 15))
    D[ROT, BG] = -np.eye(3)
    D[VEL, ROT] = skew(Rt @ gravity)
    D[VEL, BA] = -np.eye(3)
    D[POS, ROT] = skew(Rt @ M[:3, 3])
    D[POS, VEL] = np.eye(3)
    return D


def ins_noise_map():
    """Noise routing ``upsilon`` (15x12) and a builder for the 12x12 ``Q``.

    Channels are (gyro white noise, accel white noise, gyro-bias walk,
    accel-bias walk), each three-dimensional.
    """
    ups = np.zeros((15, 12))
    ups[ROT, 0:3] = np.eye(3)
    ups[VEL, 3:6] = np.eye(3)
    ups[BG, 6:9] = np.eye(3)
    ups[BA, 9:12] = np.eye(3)

    def q_builder(sigma_g: float, sigma_a: float, sigma_bg: float, sigma_ba: float) -> np.ndarray:
        sig = (sigma_g, sigma_a, sigma_bg, sigma_ba)
        if min(sig) <= 0.0:
            raise ContractError("noise standard deviations must be positive")
        return np.diag(np.repeat(np.square(sig), 3))

    return ups, q_builder


def ins_system_model(
    sigma_g: float,
    sigma_a: float,
    sigma_bg: float,
    sigma_ba: float,
    gravity=GRAVITY,
    analytic: bool = True,
) -> SystemModel:
    gravity = np.asarray(gravity, dtype=float)
    ups, q_builder = ins_noise_map()
    return SystemModel(
        group=SE23_R6,
        lam=lambda X, u: ins_lambda(X, u, gravity),
        upsilon=ups,
        q=q_builder(sigma_g, sigma_a, sigma_bg, sigma_ba),
        dlam=(lambda X, u: ins_lambda_jacobian(X, u, gravity)) if analytic else None,
    )


def position_action(X: GroupElement, y) -> np.ndarray:
    """``rho((R, v, p, b), y) = R y + p``."""
    M = X.matrix
    return M[:3, :3] @ np.asarray(y, dtype=float) + M[:3, 4]


def ins_measurement_model(r_std: float, analytic: bool = True) -> MeasurementModel:
    if r_std <= 0.0:
        raise ContractError("GNSS standard deviation must be positive")
    C = np.zeros((3, 15))
    C[:, POS] = np.eye(3)

    def dh(X):
        # h(X exp(e)) = p + R J(phi) rho ~ p + R rho
        return X.matrix[:3, :3] @ C

    return MeasurementModel(
        kind=MeasurementKind.LEFT_INVARIANT,
        h=lambda X: np.array(X.matrix[:3, 4]),
        r=r_std**2 * np.eye(3),
        rho=position_action,
        y_ref=np.zeros(3),
        dh=dh if analytic else None,
        drho=(lambda X, z: np.array(X.matrix[:3, :3])) if analytic else None,
    )


def _gamma2(w: np.ndarray) -> np.ndarray:
    """``sum_k skew(w)^k / (k+2)!``."""
    theta = float(np.linalg.norm(w))
    W = skew(w)
    if theta < SMALL_ANGLE:
        return 0.5 * np.eye(3) + W / 6.0 + (W @ W) / 24.0
    t2 = theta * theta
    return (
        0.5 * np.eye(3)
        + (theta - math.sin(theta)) / (theta * t2) * W
        + (t2 + 2.0 * math.cos(theta) - 2.0) / (2.0 * t2 * t2) * (W @ W)
    )


def propagate_exact(
    R: np.ndarray,
    v: np.ndarray,
    p: np.ndarray,
    omega: np.ndarray,
    accel: np.ndarray,
    dt: float,
    gravity=GRAVITY,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form navigation flow over ``dt`` with constant (bias-free) body inputs."""
    w = np.asarray(omega, dtype=float) * dt
    a = np.asarray(accel, dtype=float)
    R1 = R @ so3_exp(w)
    v1 = v + gravity * dt + R @ (so3_jac_left_literature(w) @ a) * dt
    p1 = p + v * dt + 0.5 * gravity * dt * dt + R @ (_gamma2(w) @ a) * dt * dt
    return R1, v1, p1
