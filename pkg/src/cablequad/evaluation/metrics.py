"""Tracking and settling metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

G = 9.81


@dataclass
class TrackingMetrics:
    rmse_x: float
    rmse_y: float
    rmse_z: float
    rmse_total: float
    rms_norm: float
    T_s: float | None = None
    T_s_over_T_n: float | None = None
    e_ss: float | None = None

    def row(self) -> list:
        return [self.rmse_x, self.rmse_y, self.rmse_z, self.rmse_total, self.rms_norm,
                _nan(self.T_s), _nan(self.T_s_over_T_n), _nan(self.e_ss)]


METRIC_COLUMNS = ["rmse_x", "rmse_y", "rmse_z", "rmse_total", "rms_norm", "T_s", "T_s_over_T_n", "e_ss"]


def _nan(v):
    return float("nan") if v is None else float(v)


def rmse_metrics(actual, desired) -> tuple[np.ndarray, float]:
    """Per-axis RMSE and their Euclidean norm."""
    e = np.asarray(actual, dtype=float) - np.asarray(desired, dtype=float)
    if e.ndim != 2 or e.shape[0] == 0:
        raise ValueError("need a non-empty (T, 3) series")
    per_axis = np.sqrt(np.mean(e * e, axis=0))
    return per_axis, float(np.sqrt(np.sum(per_axis ** 2)))


def rms_error_norm(actual, desired) -> float:
    """Alternative reading: RMS over time of the instantaneous error norm."""
    e = np.asarray(actual, dtype=float) - np.asarray(desired, dtype=float)
    return float(np.sqrt(np.mean(np.sum(e * e, axis=-1))))


def natural_period(l: float, g: float = G) -> float | None:
    return 2.0 * math.pi * math.sqrt(l / g) if l > 0 else None


def settling_time(e, dt: float, eps: float = 0.01, tau: float = 0.5) -> float | None:
    """First ``t`` with ``|e| <= eps`` on all samples of ``[t, t + tau]``."""
    e = np.asarray(e, dtype=float)
    n = int(round(tau / dt))
    inside = np.abs(e) <= eps
    run = 0
    # scan backwards: run[i] = length of the inside-streak starting at i
    streak = np.zeros(len(e), dtype=int)
    for i in range(len(e) - 1, -1, -1):
        run = run + 1 if inside[i] else 0
        streak[i] = run
    ok = np.flatnonzero(streak >= n + 1)
    return float(ok[0] * dt) if ok.size else None


def settling_metrics(e, dt: float, l: float, eps: float = 0.01, tau: float = 0.5, g: float = G):
    """``(T_s, T_s / T_n, e_ss)``; ``None`` marks an undefined quantity."""
    e = np.asarray(e, dtype=float)
    n_tau = int(round(tau / dt))
    if len(e) < n_tau + 1:
        raise ValueError("series shorter than the dwell time")
    T_s = settling_time(e, dt, eps, tau)
    T_n = natural_period(l, g)
    ratio = T_s / T_n if (T_s is not None and T_n is not None) else None
    e_ss = float(np.mean(np.abs(e[-n_tau:])))
    return T_s, ratio, e_ss
