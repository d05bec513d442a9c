"""Noisy IMU and GNSS measurements along a ground-truth trajectory."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..ins import GnssSample, ImuSample
from .trajectory import Trajectory


@dataclass(frozen=True, eq=False)
class Measurements:
    """Sensor record plus the true biases that generated it.

    ``bias[k]`` (gyro then accel) is the bias during ``[t_k, t_k+1)``; its
    last row is the bias at the final instant.  ``gnss_index[j]`` is the IMU
    instant of GNSS sample ``j``.
    """

    gyro: np.ndarray
    accel: np.ndarray
    bias: np.ndarray
    gnss: np.ndarray
    gnss_index: np.ndarray
    t: np.ndarray

    @property
    def ratio(self) -> int:
        return int(self.gnss_index[0]) if len(self.gnss_index) else 0

    def imu(self) -> list[ImuSample]:
        return [ImuSample(self.gyro[k], self.accel[k], float(self.t[k])) for k in range(len(self.gyro))]

    def gnss_samples(self) -> list[GnssSample]:
        return [GnssSample(self.gnss[j], float(self.t[i])) for j, i in enumerate(self.gnss_index)]


def synthesize_measurements(truth: Trajectory, cfg, seed: int) -> Measurements:
    """Corrupt the held inputs with white noise and biases; sample GNSS positions.

    Noise levels are continuous-time densities, so the per-sample standard
    deviation is ``sigma / sqrt(dt)`` for white noise and ``sigma sqrt(dt)``
    for each bias random-walk increment.
    """
    rng = np.random.default_rng(seed)
    K = len(truth)
    dt = truth.dt
    ratio = cfg.gnss_ratio
    b0 = np.concatenate(
        [rng.normal(0.0, cfg.init_bg_std, 3), rng.normal(0.0, cfg.init_ba_std, 3)]
    )
    walk_std = np.repeat([cfg.sigma_bg, cfg.sigma_ba], 3) * math.sqrt(dt)
    steps = rng.standard_normal((K, 6)) * walk_std
    bias = b0 + np.vstack([np.zeros((1, 6)), np.cumsum(steps, axis=0)])
    white = rng.standard_normal((K, 6)) * (np.repeat([cfg.sigma_g, cfg.sigma_a], 3) / math.sqrt(dt))
    gyro = truth.gyro + bias[:K, :3] + white[:, :3]
    accel = truth.accel + bias[:K, 3:] + white[:, 3:]
    idx = np.arange(ratio, K + 1, ratio)
    gnss = truth.p[idx] + rng.normal(0.0, cfg.gnss_std, (len(idx), 3))
    return Measurements(gyro, accel, bias, gnss, idx, truth.t)
