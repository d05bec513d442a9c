"""Summary statistics over Monte-Carlo results and the pass/fail checks built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .montecarlo import MonteCarloResult

STEADY_WINDOW = 40.0
TRANSIENT_WINDOW = 15.0
# thresholds for the equivalence experiment at the default sub-step count
MAX_GAP_ROT_DEG = 5e-4
MAX_AIRM = 2e-3
ANEES_RANGE = (0.7, 1.3)
SLOPE_RANGE = (-1.3, -0.7)
GAP_N1_RANGE_DEG = (3e-3, 3e-2)
MAX_RESET_REL_DIFF = 0.01


def steady_mask(res: MonteCarloResult, window: float = STEADY_WINDOW) -> np.ndarray:
    return res.window(start=res.config.duration - window)


def gap_summary(res: MonteCarloResult, window: float = STEADY_WINDOW) -> dict:
    """Gap means over trials and the last ``window`` seconds; rotation in degrees."""
    if res.gaps is None:
        raise ContractError("gap summary needs a run with both handedness")
    m = steady_mask(res, window)
    g = res.gaps[:, m, :]
    return {
        "gap_rot": math.degrees(float(g[..., 0].mean())),
        "gap_pos": float(g[..., 1].mean()),
        "gap_vel": float(g[..., 2].mean()),
        "gap_mu": float(g[..., 4].mean()),
        "airm": float(g[..., 5].mean()),
    }


def anees(res: MonteCarloResult, name: str, window: float = STEADY_WINDOW) -> float:
    """Per-dimension NEES averaged over trials and the last ``window`` seconds."""
    m = steady_mask(res, window)
    return float(res.nees[name][:, m].mean() / 15.0)


def rotation_rmse(res: MonteCarloResult, name: str, mask=None) -> np.ndarray:
    """Rotation RMSE in degrees per epoch, or over the epochs in ``mask``."""
    e = res.errors[name][:, :, 0]
    if mask is None:
        return np.degrees(np.sqrt(np.mean(e**2, axis=0)))
    return np.degrees(np.sqrt(np.mean(e[:, mask] ** 2)))


def loglog_slope(ns, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(ns)``."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.size < 2 or np.any(values <= 0):
        raise ContractError("slope needs at least two positive points")
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def equivalence_checks(
    res: MonteCarloResult,
    window: float = STEADY_WINDOW,
    max_gap_rot: float = MAX_GAP_ROT_DEG,
    max_airm: float = MAX_AIRM,
) -> list[Check]:
    s = gap_summary(res, window)
    return [
        Check("gap_rot", s["gap_rot"] <= max_gap_rot, f"{s['gap_rot']:.3g} deg (limit {max_gap_rot:g})"),
        Check("airm", s["airm"] <= max_airm, f"{s['airm']:.3g} (limit {max_airm:g})"),
    ]


def consistency_checks(res: MonteCarloResult, window: float = STEADY_WINDOW, bounds=ANEES_RANGE) -> list[Check]:
    out = []
    for f in res.config.filters:
        a = anees(res, f, window)
        out.append(Check(f"anees_{f}", bounds[0] <= a <= bounds[1], f"{a:.3f} (range {bounds[0]}..{bounds[1]})"))
    return out


def sweep_checks(ns, gaps, slope_range=SLOPE_RANGE, n1_range=GAP_N1_RANGE_DEG) -> list[Check]:
    """Scaling checks on steady-state rotation gaps (degrees) against sub-step counts."""
    out = []
    ns = list(ns)
    if len(ns) >= 2:
        slope = loglog_slope(ns, gaps)
        out.append(
            Check("slope", slope_range[0] <= slope <= slope_range[1], f"{slope:.3f} (range {slope_range[0]}..{slope_range[1]})")
        )
    if 1 in ns:
        g1 = gaps[ns.index(1)]
        out.append(Check("gap_N1", n1_range[0] <= g1 <= n1_range[1], f"{g1:.3g} deg (range {n1_range[0]:g}..{n1_range[1]:g})"))
    return out


def ablation_checks(
    variants: dict,
    steady: float = STEADY_WINDOW,
    transient: float = TRANSIENT_WINDOW,
    max_rel: float = MAX_RESET_REL_DIFF,
) -> list[Check]:
    """Orderings between ``{(hand, reset): MonteCarloResult}`` for hand in L/R, reset in True/False."""
    ref = variants[("L", True)]
    steady_m = steady_mask(ref, steady)
    trans_m = ref.window(stop=transient)
    curves = {
        k: np.sqrt(np.mean(r.errors[k[0]] ** 2, axis=0)) for k, r in variants.items()
    }
    a, b = curves[("L", True)], curves[("R", True)]
    rel = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
    out = [Check("reset_L_vs_R", rel < max_rel, f"max relative RMSE difference {rel:.3g} (limit {max_rel:g})")]
    for hand in ("L", "R"):
        with_r = rotation_rmse(variants[(hand, True)], hand, steady_m)
        without = rotation_rmse(variants[(hand, False)], hand, steady_m)
        out.append(
            Check(f"asymptotic_{hand}", with_r <= without, f"reset {with_r:.4f} deg vs no-reset {without:.4f} deg")
        )
    tl = rotation_rmse(variants[("L", False)], "L", trans_m)
    tr = rotation_rmse(variants[("R", False)], "R", trans_m)
    out.append(Check("transient_noreset", tl < tr, f"L {tl:.4f} deg vs R {tr:.4f} deg"))
    return out
