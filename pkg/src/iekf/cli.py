"""``iekf`` command line: equivalence, sub-step sweep, reset ablation and single runs.

Exit status is 0 when every acceptance check of the command passes, 2 when a
check fails and 1 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
import typing
from dataclasses import asdict, fields
from pathlib import Path

from .errors import ContractError
from .sim import analysis
from .sim.montecarlo import SimConfig, run_monte_carlo, write_metrics_csv
from .sim.trajectory import generate_trajectory

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BREACH = 2

DEFAULT_SWEEP = (1, 2, 5, 10, 20, 40, 80)

KEY_HELP = {
    "trials": "number of Monte-Carlo trials",
    "duration": "simulated time [s]",
    "imu_rate": "IMU rate [Hz]",
    "gnss_rate": "GNSS rate [Hz], must divide imu_rate",
    "substeps": "covariance sub-steps per IMU interval",
    "init_att_std": "initial attitude std per axis [deg]",
    "init_vel_std": "initial velocity std per axis [m/s]",
    "init_pos_std": "initial position std per axis [m]",
    "init_bg_std": "initial gyro bias std [rad/s]",
    "init_ba_std": "initial accel bias std [m/s^2]",
    "sigma_g": "gyro white-noise density [rad/s/sqrt(Hz)]",
    "sigma_a": "accel white-noise density [m/s^2/sqrt(Hz)]",
    "sigma_bg": "gyro bias random-walk density [rad/s^2/sqrt(Hz)]",
    "sigma_ba": "accel bias random-walk density [m/s^3/sqrt(Hz)]",
    "gnss_std": "GNSS position noise std per axis [m]",
    "seed": "base seed; trial i uses seed + i",
    "reset_enabled": "apply the covariance reset after updates (true/false)",
    "handedness": "filters to run: left, right or both",
    "trajectory": "figure8, line, hover or csv:<path> (t,qw,qx,qy,qz,px,py,pz)",
    "gravity": "gravity magnitude [m/s^2], pointing along -z",
    "workers": "parallel worker threads",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _field_types() -> dict:
    hints = typing.get_type_hints(SimConfig)
    return {f.name: hints[f.name] for f in fields(SimConfig)}


def _convert(key: str, raw: str):
    kind = _field_types()[key]
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(f"{key}: expected {kind.__name__}, got {raw!r}") from None


def _parse_pair(text: str, where: str) -> tuple[str, str]:
    if "=" not in text:
        raise UsageError(f"{where}: expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    key = key.strip()
    if key not in _field_types():
        raise UsageError(f"{where}: unknown config key {key!r}")
    return key, value


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror or exc}") from None
    out = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, value = _parse_pair(line, f"{path}:{lineno}")
        out[key] = _convert(key, value)
    return out


def build_config(args) -> SimConfig:
    values = asdict(SimConfig())
    if args.config:
        values.update(read_config(args.config))
    for item in args.set or []:
        key, value = _parse_pair(item, "--set")
        values[key] = _convert(key, value)
    for key in ("trials", "substeps", "seed"):
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    try:
        return SimConfig(**values)
    except ContractError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _write_gaps_csv(res, path) -> None:
    cols = ("time", "gap_rot", "gap_pos", "gap_vel", "gap_mu", "airm")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in res.by_filter(res.config.filters[0]):
            w.writerow([format(getattr(r, c), ".12g") for c in cols])


def _report(checks) -> int:
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_BREACH


def _truth(cfg: SimConfig):
    return generate_trajectory(cfg.trajectory, cfg.duration, cfg.imu_rate, cfg.gravity_vector)


def cmd_equivalence(cfg: SimConfig, out_dir: Path, window: float = analysis.STEADY_WINDOW) -> int:
    cfg = cfg.replace(handedness="both", reset_enabled=True)
    res = run_monte_carlo(cfg)
    write_metrics_csv(res.records, out_dir / "rmse.csv")
    _write_gaps_csv(res, out_dir / "gaps.csv")
    print(f"trials: {cfg.trials - len(res.failed)} ok, {len(res.failed)} failed; substeps {cfg.substeps}")
    status = _report(analysis.equivalence_checks(res, window))
    # consistency is reported alongside but only the gap thresholds set the exit code
    for c in analysis.consistency_checks(res, window):
        print(f"info {c.name}: {c.detail}")
    return status


def cmd_discretisation_sweep(
    cfg: SimConfig, out_dir: Path, n_list=DEFAULT_SWEEP, window: float = analysis.STEADY_WINDOW
) -> int:
    if len(n_list) == 1:
        return cmd_equivalence(cfg.replace(substeps=n_list[0]), out_dir, window)
    cfg = cfg.replace(handedness="both", reset_enabled=True)
    truth = _truth(cfg)
    rows = []
    for n in n_list:
        res = run_monte_carlo(cfg.replace(substeps=n), truth)
        s = analysis.gap_summary(res, window)
        rows.append((n, s, len(res.failed)))
        print(f"N={n}: gap_rot {s['gap_rot']:.4g} deg, airm {s['airm']:.4g}, failed {len(res.failed)}")
    cols = ("gap_rot", "gap_pos", "gap_vel", "gap_mu", "airm")
    with (out_dir / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("N",) + cols + ("failed",))
        for n, s, nf in rows:
            w.writerow([n] + [format(s[c], ".12g") for c in cols] + [nf])
    return _report(analysis.sweep_checks([r[0] for r in rows], [r[1]["gap_rot"] for r in rows]))


def cmd_reset_ablation(
    cfg: SimConfig,
    out_dir: Path,
    window: float = analysis.STEADY_WINDOW,
    transient: float = analysis.TRANSIENT_WINDOW,
) -> int:
    truth = _truth(cfg)
    variants = {}
    for reset in (True, False):
        res = run_monte_carlo(cfg.replace(handedness="both", reset_enabled=reset), truth)
        for hand in ("L", "R"):
            variants[(hand, reset)] = res
    names = {k: f"{k[0]}_{'reset' if k[1] else 'noreset'}" for k in variants}
    metrics = ("rmse_rot", "rmse_pos", "rmse_vel", "rmse_bg", "rmse_ba", "anees")
    series = {k: variants[k].by_filter(k[0]) for k in variants}
    with (out_dir / "ablation.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time"] + [f"{names[k]}_{m}" for k in variants for m in metrics])
        ref = series[("L", True)]
        for i, rec in enumerate(ref):
            row = [format(rec.time, ".12g")]
            for k in variants:
                row += [format(getattr(series[k][i], m), ".12g") for m in metrics]
            w.writerow(row)
    return _report(analysis.ablation_checks(variants, window, transient))


def cmd_single_run(cfg: SimConfig, out_dir: Path, window: float = analysis.STEADY_WINDOW) -> int:
    res = run_monte_carlo(cfg)
    write_metrics_csv(res.records, out_dir / "rmse.csv")
    if res.gaps is not None:
        _write_gaps_csv(res, out_dir / "gaps.csv")
    for f in cfg.filters:
        print(f"{f}: steady rotation RMSE {analysis.rotation_rmse(res, f, analysis.steady_mask(res, window)):.4f} deg, "
              f"ANEES {analysis.anees(res, f, window):.3f}")
    print(f"failed trials: {len(res.failed)}")
    return EXIT_OK


def _key_listing() -> str:
    defaults = asdict(SimConfig())
    width = max(map(len, defaults))
    lines = ["config keys (for --config files and --set):"]
    for key, value in defaults.items():
        lines.append(f"  {key:<{width}}  {KEY_HELP[key]} (default: {value})")
    return "\n".join(lines)


def _n_list(text: str):
    try:
        ns = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not ns or min(ns) < 1:
        raise argparse.ArgumentTypeError("sub-step counts must be >= 1")
    return ns


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key=value config file")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory (created if missing)")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", help="override a config key (repeatable)")
    common.add_argument("--trials", type=int, help="shorthand for --set trials=N")
    common.add_argument("--substeps", type=int, help="shorthand for --set substeps=N")
    common.add_argument("--seed", type=int, help="shorthand for --set seed=S")
    common.add_argument("--window", type=float, default=analysis.STEADY_WINDOW, help="steady-state window [s]")
    fmt = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog="iekf", description=__doc__, epilog=_key_listing(), formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser(
        "equivalence", parents=[common], epilog=_key_listing(), formatter_class=fmt,
        help="left vs right IEKF with reset; writes rmse.csv and gaps.csv",
    )
    p = sub.add_parser(
        "discretisation-sweep", parents=[common], epilog=_key_listing(), formatter_class=fmt,
        help="gap against sub-step count; writes sweep.csv",
    )
    p.add_argument("--n-list", type=_n_list, default=DEFAULT_SWEEP, help="comma-separated sub-step counts")
    p = sub.add_parser(
        "reset-ablation", parents=[common], epilog=_key_listing(), formatter_class=fmt,
        help="L/R with and without reset; writes ablation.csv",
    )
    p.add_argument("--transient", type=float, default=analysis.TRANSIENT_WINDOW, help="transient window [s]")
    sub.add_parser(
        "single-run", parents=[common], epilog=_key_listing(), formatter_class=fmt,
        help="run the configured filters; writes rmse.csv (and gaps.csv for both)",
    )
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        out_dir = Path(args.out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {out_dir}: {exc.strerror or exc}") from None
        if args.command == "equivalence":
            return cmd_equivalence(cfg, out_dir, args.window)
        if args.command == "discretisation-sweep":
            return cmd_discretisation_sweep(cfg, out_dir, args.n_list, args.window)
        if args.command == "reset-ablation":
            return cmd_reset_ablation(cfg, out_dir, args.window, args.transient)
        return cmd_single_run(cfg, out_dir, args.window)
    except UsageError as exc:
        print(f"iekf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractError as exc:
        print(f"iekf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
