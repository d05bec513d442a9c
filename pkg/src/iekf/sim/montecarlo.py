"""Monte-Carlo comparison of left and right IEKFs on the GNSS-aided INS."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..errors import ContractError
from ..ins import GRAVITY, ins_noise_map
from ..lie import SE23_R6
from . import kernels
from .sensors import Measurements, synthesize_measurements
from .trajectory import Trajectory, generate_trajectory

HANDEDNESS_SETS = {"left": ("L",), "right": ("R",), "both": ("L", "R")}
# error blocks reported by the kernel: rotation, position, velocity, gyro bias, accel bias
_ERR_FIELDS = ("rmse_rot", "rmse_pos", "rmse_vel", "rmse_bg", "rmse_ba")


@dataclass(frozen=True)
class SimConfig:
    """Monte-Carlo experiment settings.

    Angles are in degrees, everything else SI.  ``sigma_*`` are
    continuous-time noise densities (gyro, accel, gyro-bias walk,
    accel-bias walk) used both to simulate the sensors and inside the filters.
    """

    trials: int = 100
    duration: float = 80.0
    imu_rate: float = 200.0
    gnss_rate: float = 10.0
    substeps: int = 80
    init_att_std: float = 20.0
    init_vel_std: float = 0.5
    init_pos_std: float = 1.0
    init_bg_std: float = 0.01
    init_ba_std: float = 0.1
    sigma_g: float = 0.01
    sigma_a: float = 0.05
    sigma_bg: float = 1e-4
    sigma_ba: float = 1e-3
    gnss_std: float = 0.2
    seed: int = 0
    reset_enabled: bool = True
    handedness: str = "both"
    trajectory: str = "figure8"
    gravity: float = float(-GRAVITY[2])
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.trials < 1:
            raise ContractError("trials must be >= 1")
        if self.substeps < 1:
            raise ContractError("substeps must be >= 1")
        if self.workers < 1:
            raise ContractError("workers must be >= 1")
        if self.duration <= 0 or self.imu_rate <= 0 or self.gnss_rate <= 0:
            raise ContractError("duration and rates must be positive")
        ratio = self.imu_rate / self.gnss_rate
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ContractError("imu_rate must be an integer multiple of gnss_rate")
        stds = {k: getattr(self, k) for k in self.std_fields()}
        bad = [k for k, x in stds.items() if not (x > 0 and math.isfinite(x))]
        if bad:
            raise ContractError(f"standard deviations must be positive: {', '.join(bad)}")
        if self.handedness not in HANDEDNESS_SETS:
            raise ContractError(f"handedness must be one of {sorted(HANDEDNESS_SETS)}")
        if int(self.duration * self.gnss_rate + 1e-9) < 1:
            raise ContractError("duration shorter than one GNSS period")

    @staticmethod
    def std_fields() -> tuple[str, ...]:
        return (
            "init_att_std", "init_vel_std", "init_pos_std", "init_bg_std", "init_ba_std",
            "sigma_g", "sigma_a", "sigma_bg", "sigma_ba", "gnss_std",
        )

    @property
    def gnss_ratio(self) -> int:
        return int(round(self.imu_rate / self.gnss_rate))

    @property
    def filters(self) -> tuple[str, ...]:
        return HANDEDNESS_SETS[self.handedness]

    @property
    def gravity_vector(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.gravity])

    def replace(self, **changes) -> "SimConfig":
        return SimConfig(**{**asdict(self), **changes})


@dataclass(frozen=True)
class MetricsRecord:
    """Trial-aggregated metrics of one filter at one GNSS epoch.

    Gap fields compare the left and right runs and are NaN when only one
    handedness was run.
    """

    filter: str
    time: float
    rmse_rot: float
    rmse_pos: float
    rmse_vel: float
    rmse_bg: float
    rmse_ba: float
    anees: float
    gap_rot: float
    gap_pos: float
    gap_vel: float
    gap_mu: float
    airm: float


@dataclass(frozen=True, eq=False)
class TrialResult:
    index: int
    ok: bool
    errors: dict = field(default_factory=dict)
    nees: dict = field(default_factory=dict)
    gaps: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    """Aggregated records plus the per-trial arrays they came from.

    ``errors[f]`` has shape (trials, epochs, 5) with rotation in radians,
    ``nees[f]`` is (trials, epochs) and ``gaps`` is (trials, epochs, 6):
    rotation (rad), position, velocity, bias, offset and AIRM.  Only
    successful trials are kept; ``failed`` lists the excluded indices.
    """

    config: SimConfig
    times: np.ndarray
    records: list
    errors: dict
    nees: dict
    gaps: np.ndarray | None
    failed: list

    def by_filter(self, name: str) -> list[MetricsRecord]:
        return [r for r in self.records if r.filter == name]

    def window(self, start: float | None = None, stop: float | None = None) -> np.ndarray:
        """Boolean epoch mask for ``start <= t <= stop``."""
        lo = -np.inf if start is None else start - 1e-9
        hi = np.inf if stop is None else stop + 1e-9
        return (self.times >= lo) & (self.times <= hi)


def _initial_sigma(cfg: SimConfig) -> np.ndarray:
    std = np.repeat(
        [math.radians(cfg.init_att_std), cfg.init_vel_std, cfg.init_pos_std, cfg.init_bg_std, cfg.init_ba_std],
        3,
    )
    return np.diag(std**2)


def _process_noise_diag(cfg: SimConfig) -> np.ndarray:
    ups, q_builder = ins_noise_map()
    Q = ups @ q_builder(cfg.sigma_g, cfg.sigma_a, cfg.sigma_bg, cfg.sigma_ba) @ ups.T
    return np.diag(Q).copy()


def run_trial(cfg: SimConfig, truth: Trajectory, index: int) -> TrialResult:
    """One trial: shared sensor data and initial estimate, one run per requested filter."""
    seq = np.random.SeedSequence(cfg.seed + index)
    sensor_seed, init_seed = (int(s.generate_state(1)[0]) for s in seq.spawn(2))
    meas: Measurements = synthesize_measurements(truth, cfg, sensor_seed)
    rng = np.random.default_rng(init_seed)
    S0_left = _initial_sigma(cfg)
    eps = np.zeros(15)
    eps[:9] = rng.standard_normal(9) * np.sqrt(np.diag(S0_left)[:9])
    # truth = estimate * exp(eps), i.e. a draw from the initial left CGD
    X_true = np.eye(5)
    X_true[:3, :3], X_true[:3, 3], X_true[:3, 4] = truth.R[0], truth.v[0], truth.p[0]
    E = SE23_R6.exp(-eps).matrix
    X0 = X_true @ E
    R0, v0, p0 = X0[:3, :3].copy(), X0[:3, 3].copy(), X0[:3, 4].copy()
    b0 = np.zeros(6)

    idx = meas.gnss_index
    g = cfg.gravity_vector
    qdiag = _process_noise_diag(cfg)
    Rmeas = cfg.gnss_std**2 * np.eye(3)
    dt = truth.dt
    outs = {}
    for name in cfg.filters:
        right = name == "R"
        if right:
            Ad = kernels.adjoint(R0, v0, p0)
            S0 = Ad @ S0_left @ Ad.T
            S0 = 0.5 * (S0 + S0.T)
        else:
            S0 = S0_left
        out = kernels.run_ins_filter(
            meas.gyro, meas.accel, meas.gnss, cfg.gnss_ratio, dt, cfg.substeps, right,
            cfg.reset_enabled, R0, v0, p0, b0, S0, qdiag, Rmeas, g,
            truth.R[idx], truth.v[idx], truth.p[idx], meas.bias[idx],
        )
        if out[-1] != kernels.OK:
            return TrialResult(index, False)
        outs[name] = out
    gaps = None
    if len(outs) == 2:
        L, R = outs["L"], outs["R"]
        gaps = kernels.pair_gaps(*L[:6], *R[:6])
    return TrialResult(
        index,
        True,
        errors={k: o[6] for k, o in outs.items()},
        nees={k: o[7] for k, o in outs.items()},
        gaps=gaps,
    )


def _aggregate(cfg, times, errors, nees, gaps) -> list[MetricsRecord]:
    records = []
    nan = float("nan")
    if gaps is not None:
        gmean = gaps.mean(axis=0)
        gmean[:, 0] = np.degrees(gmean[:, 0])
    for name in cfg.filters:
        e = errors[name]
        rmse = np.sqrt(np.mean(e**2, axis=0))
        rmse[:, 0] = np.degrees(rmse[:, 0])
        anees = nees[name].mean(axis=0) / 15.0
        for m, t in enumerate(times):
            if gaps is not None:
                gap = (gmean[m, 0], gmean[m, 1], gmean[m, 2], gmean[m, 4], gmean[m, 5])
            else:
                gap = (nan,) * 5
            records.append(MetricsRecord(name, float(t), *map(float, rmse[m]), float(anees[m]), *map(float, gap)))
    return records


def run_monte_carlo(cfg: SimConfig, truth: Trajectory | None = None) -> MonteCarloResult:
    """Run ``cfg.trials`` independent trials (seeds ``seed + i``) and aggregate per GNSS epoch.

    Trials whose filters fail numerically are dropped and listed in
    ``failed``.  Results are reduced in trial order, so ``workers`` never
    changes the output.
    """
    cfg.validate()
    if truth is None:
        truth = generate_trajectory(cfg.trajectory, cfg.duration, cfg.imu_rate, cfg.gravity_vector)
    idx = np.arange(cfg.gnss_ratio, len(truth) + 1, cfg.gnss_ratio)
    times = truth.t[idx]

    def work(i):
        return run_trial(cfg, truth, i)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, range(cfg.trials)))
    else:
        results = [work(i) for i in range(cfg.trials)]

    good = [r for r in results if r.ok]
    failed = [r.index for r in results if not r.ok]
    if not good:
        raise ContractError(f"all {cfg.trials} trials failed numerically")
    errors = {f: np.stack([r.errors[f] for r in good]) for f in cfg.filters}
    nees = {f: np.stack([r.nees[f] for r in good]) for f in cfg.filters}
    gaps = np.stack([r.gaps for r in good]) if len(cfg.filters) == 2 else None
    records = _aggregate(cfg, times, errors, nees, gaps)
    return MonteCarloResult(cfg, times, records, errors, nees, gaps, failed)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".12g")


def write_metrics_csv(records, path) -> None:
    """One header row with every :class:`MetricsRecord` field, then one row per record."""
    path = Path(path)
    names = [f.name for f in fields(MetricsRecord)]
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for r in records:
                w.writerow([_fmt(getattr(r, n)) for n in names])
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc.strerror or exc}") from exc


def read_metrics_csv(path) -> list[MetricsRecord]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        MetricsRecord(**{k: (v if k == "filter" else float(v)) for k, v in row.items()})
        for row in rows
    ]
