"""Simulation harness for the GNSS-aided INS experiments."""

from .montecarlo import MetricsRecord, MonteCarloResult, SimConfig, run_monte_carlo, write_metrics_csv
from .sensors import Measurements, synthesize_measurements
from .trajectory import Trajectory, generate_trajectory

__all__ = [
    "SimConfig", "MetricsRecord", "MonteCarloResult", "run_monte_carlo", "write_metrics_csv",
    "Measurements", "synthesize_measurements", "Trajectory", "generate_trajectory",
]
