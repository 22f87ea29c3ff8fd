"""Metrics, geometric baseline and evaluation scenarios."""
from .baseline import BaselineGains, geometric_baseline_control
from .metrics import (
    METRIC_COLUMNS,
    TrackingMetrics,
    natural_period,
    rms_error_norm,
    rmse_metrics,
    settling_metrics,
    settling_time,
)
from .scenarios import SCENARIOS, ScenarioConfig, ScenarioResult, drop_phases, run_episode, run_scenario

__all__ = [
    "BaselineGains", "METRIC_COLUMNS", "SCENARIOS", "ScenarioConfig", "ScenarioResult", "TrackingMetrics",
    "drop_phases", "geometric_baseline_control", "natural_period", "rms_error_norm", "rmse_metrics",
    "run_episode", "run_scenario", "settling_metrics", "settling_time",
]
