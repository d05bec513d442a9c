"""Ground-truth trajectories for the INS simulation.

Inputs are held constant over each IMU interval and the truth is the exact
solution of the navigation equations under that held input, so the only
mismatch between filter and truth is noise and initial error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial.transform import Rotation, Slerp

from ..errors import ContractError
from ..ins import GRAVITY, ImuSample, InsState, propagate_exact
from ..lie import so3_log

CSV_HEADER = ("t", "qw", "qx", "qy", "qz", "px", "py", "pz")
PROFILES = ("figure8", "line", "hover")
FIGURE8_PERIOD = 10.0
FIGURE8_SIZE = 4.0
FIGURE8_ATT_RATES = (1.3, 0.9, 0.4)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Truth at ``K + 1`` IMU instants and the ``K`` bias-free held inputs.

    ``gyro[k]`` and ``accel[k]`` act on ``[t[k], t[k+1])``.
    """

    t: np.ndarray
    R: np.ndarray
    v: np.ndarray
    p: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    gravity: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __len__(self) -> int:
        return self.gyro.shape[0]

    def pairs(self) -> list[tuple[InsState, ImuSample]]:
        """``(state at t_k, input held over [t_k, t_k+1))`` for every interval."""
        return [
            (
                InsState(R=self.R[k], p=self.p[k], v=self.v[k]),
                ImuSample(self.gyro[k], self.accel[k], float(self.t[k])),
            )
            for k in range(len(self))
        ]


def _integrate(t, R0, v0, p0, gyro, accel, gravity) -> Trajectory:
    K = gyro.shape[0]
    R = np.empty((K + 1, 3, 3))
    v = np.empty((K + 1, 3))
    p = np.empty((K + 1, 3))
    R[0], v[0], p[0] = R0, v0, p0
    dt = t[1] - t[0]
    for k in range(K):
        R[k + 1], v[k + 1], p[k + 1] = propagate_exact(
            R[k], v[k], p[k], gyro[k], accel[k], dt, gravity
        )
    return Trajectory(t, R, v, p, gyro, accel, np.array(gravity, dtype=float))


def _euler_zyx(phi, theta, psi) -> np.ndarray:
    return Rotation.from_euler("ZYX", np.stack([psi, theta, phi], axis=-1)).as_matrix()


def _profile(name: str, t: np.ndarray):
    """World position/velocity/acceleration and ZYX Euler angles with rates."""
    z = np.zeros_like(t)
    if name == "figure8":
        # lemniscate-like loop with a gentle climb and attitude motion
        w = 2.0 * math.pi / FIGURE8_PERIOD
        a = FIGURE8_SIZE
        pos = np.stack([a * np.sin(w * t), 0.5 * a * np.sin(2 * w * t), 1.0 + 0.5 * np.sin(0.5 * w * t)], -1)
        vel = np.stack([a * w * np.cos(w * t), a * w * np.cos(2 * w * t), 0.25 * w * np.cos(0.5 * w * t)], -1)
        acc = np.stack(
            [-a * w**2 * np.sin(w * t), -2.0 * a * w**2 * np.sin(2 * w * t), -0.125 * w**2 * np.sin(0.5 * w * t)], -1
        )
        wr, wp, wy = FIGURE8_ATT_RATES
        ang = (0.3 * np.sin(wr * t), 0.2 * np.sin(wp * t + 0.5), 1.2 * np.sin(wy * t))
        rate = (0.3 * wr * np.cos(wr * t), 0.2 * wp * np.cos(wp * t + 0.5), 1.2 * wy * np.cos(wy * t))
    elif name == "line":
        pos = np.stack([1.5 * t, z, z], -1)
        vel = np.stack([np.full_like(t, 1.5), z, z], -1)
        acc = np.zeros_like(pos)
        ang = rate = (z, z, z)
    elif name == "hover":
        pos = np.stack([z, z, np.ones_like(t)], -1)
        vel = acc = np.zeros_like(pos)
        ang = rate = (z, z, z)
    else:
        raise ContractError(f"unknown trajectory profile {name!r}; expected one of {PROFILES}")
    return pos, vel, acc, ang, rate


def _body_rate(ang, rate) -> np.ndarray:
    phi, theta, _ = ang
    dphi, dtheta, dpsi = rate
    return np.stack(
        [
            dphi - dpsi * np.sin(theta),
            dtheta * np.cos(phi) + dpsi * np.cos(theta) * np.sin(phi),
            -dtheta * np.sin(phi) + dpsi * np.cos(theta) * np.cos(phi),
        ],
        -1,
    )


def synthetic_trajectory(
    duration: float, imu_rate: float, profile: str = "figure8", gravity=GRAVITY
) -> Trajectory:
    """Analytic profile sampled at interval midpoints, then integrated exactly."""
    if duration <= 0 or imu_rate <= 0:
        raise ContractError("duration and imu_rate must be positive")
    K = int(round(duration * imu_rate))
    dt = 1.0 / imu_rate
    t = np.arange(K + 1) * dt
    gravity = np.asarray(gravity, dtype=float)
    tm = t[:-1] + 0.5 * dt
    _, _, acc_m, ang_m, rate_m = _profile(profile, tm)
    pos0, vel0, _, ang0, _ = _profile(profile, t[:1])
    R_m = _euler_zyx(*ang_m)
    gyro = _body_rate(ang_m, rate_m)
    accel = np.einsum("kji,kj->ki", R_m, acc_m - gravity)
    return _integrate(t, _euler_zyx(*ang0)[0], vel0[0], pos0[0], gyro, accel, gravity)


def read_ground_truth_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse ``t,qw,qx,qy,qz,px,py,pz``; returns times, quaternions (scalar first), positions."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ContractError(f"{path}: header must be {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise ContractError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ContractError(f"{path}:{lineno}: non-numeric field ({exc})") from None
            if not all(math.isfinite(x) for x in vals):
                raise ContractError(f"{path}:{lineno}: non-finite value")
            if rows and vals[0] <= rows[-1][0]:
                raise ContractError(f"{path}:{lineno}: time is not strictly increasing")
            if np.linalg.norm(vals[1:5]) < 1e-9:
                raise ContractError(f"{path}:{lineno}: zero quaternion")
            rows.append(vals)
    if len(rows) < 4:
        raise ContractError(f"{path}: need at least 4 rows, got {len(rows)}")
    data = np.array(rows)
    return data[:, 0], data[:, 1:5], data[:, 5:8]


def csv_trajectory(path, imu_rate: float, duration: float | None = None, gravity=GRAVITY) -> Trajectory:
    """Resample recorded ground truth to ``imu_rate`` and derive held IMU inputs.

    Position is interpolated with a cubic spline and attitude with slerp.
    Inputs come from differences of the resampled truth; the returned truth is
    re-integrated from those inputs so it matches the held-input model exactly.
    """
    ts, quat, pos = read_ground_truth_csv(path)
    gravity = np.asarray(gravity, dtype=float)
    span = ts[-1] - ts[0]
    if duration is None:
        duration = span
    if duration > span + 1e-9:
        raise ContractError(f"requested duration {duration} s exceeds recorded span {span:.3f} s")
    dt = 1.0 / imu_rate
    K = int(math.floor(duration * imu_rate + 1e-9))
    if K < 2:
        raise ContractError("recording too short for the requested IMU rate")
    t = np.arange(K + 1) * dt
    tq = ts[0] + t
    rot = Rotation.from_quat(quat[:, [1, 2, 3, 0]])
    R = Slerp(ts, rot)(np.minimum(tq, ts[-1])).as_matrix()
    spline = CubicSpline(ts, pos)
    # world velocity and acceleration at interval midpoints from central
    # differences; the stencil is shifted inward where it would leave the record
    tm = np.clip(tq[:-1] + 0.5 * dt, ts[0] + dt, ts[-1] - dt)
    v_mid = (spline(tm + 0.5 * dt) - spline(tm - 0.5 * dt)) / dt
    a_mid = (spline(tm + dt) - 2.0 * spline(tm) + spline(tm - dt)) / dt**2
    gyro = np.array([so3_log(R[k].T @ R[k + 1]) / dt for k in range(K)])
    R_mid = np.array([R[k] @ Rotation.from_rotvec(0.5 * dt * gyro[k]).as_matrix() for k in range(K)])
    accel = np.einsum("kji,kj->ki", R_mid, a_mid - gravity)
    v0 = v_mid[0] - (tm[0] - tq[0]) * a_mid[0]
    return _integrate(t, R[0], v0, spline(tq[0]), gyro, accel, gravity)


def generate_trajectory(
    source: str = "figure8", duration: float = 80.0, imu_rate: float = 200.0, gravity=GRAVITY
) -> Trajectory:
    """Synthetic profile name or ``csv:<path>`` to a recorded ground truth."""
    if source.startswith("csv:"):
        return csv_trajectory(source[4:], imu_rate, duration, gravity)
    return synthetic_trajectory(duration, imu_rate, source, gravity)
