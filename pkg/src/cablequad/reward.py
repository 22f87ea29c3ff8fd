"""Shaped tracking reward and early-termination checks."""
from __future__ import annotations

from dataclasses import dataclass, fields
from enum import IntEnum

import numpy as np

from .dynamics import SystemState
from .mathcore import euler_zyx, norm
from .reference import ReferenceSample

TERM_NAMES = ("xP", "psi", "Omega", "qdot", "a", "da")


@dataclass(frozen=True)
class RewardConfig:
    w_xP: float = 1.0
    w_psi: float = 1.0
    w_Omega: float = 1.0
    w_qdot: float = 1.0
    w_a: float = 1.0
    w_da: float = 1.0
    alpha_xP: float = 5.0
    alpha_psi: float = 1.0
    alpha_Omega: float = 0.5
    alpha_qdot: float = 0.5
    alpha_a: float = 0.1
    alpha_da: float = 1.0
    rho: float = 0.8
    window: int = 5

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.window < 2:
            raise ValueError("window must cover at least two actions")


class Termination(IntEnum):
    NONE = 0
    GROUND = 1
    POSITION = 2
    VELOCITY = 3
    ATTITUDE = 4


@dataclass(frozen=True)
class TerminationConfig:
    eps_pos: float = 1.0
    eps_vel: float = 5.0
    attitude_limit: float = np.pi / 2

    def __post_init__(self):
        if min(self.eps_pos, self.eps_vel, self.attitude_limit) <= 0:
            raise ValueError("termination thresholds must be positive")


def action_change_norm(actions: np.ndarray, rho: float) -> np.ndarray:
    """Exponentially weighted L2 norm of successive differences.

    ``actions`` is ``(..., K, 4)`` ordered oldest first; the newest change has
    weight 1 and each older one is discounted by ``rho``.
    """
    d = np.diff(actions, axis=-2)
    k = d.shape[-2]
    weights = rho ** np.arange(k - 1, -1, -1, dtype=float)
    return np.sqrt(np.sum(weights[:, None] * d * d, axis=(-2, -1)))


def cable_rate(state: SystemState, l) -> np.ndarray:
    """``|v_P - v_Q| / l``; zero when there is no cable."""
    l = np.asarray(l, dtype=float)
    rel = norm(state.v_P - state.v_Q)
    return np.where(l > 0, rel / np.where(l > 0, l, 1.0), 0.0)


def compute_reward(state: SystemState, ref: ReferenceSample, a: np.ndarray, action_history: np.ndarray,
                   cfg: RewardConfig, l) -> tuple[np.ndarray, np.ndarray]:
    """Total reward and the six individual terms (last axis, order ``TERM_NAMES``).

    ``action_history`` holds previous actions ``(..., K, 4)`` oldest first, with
    K >= 1; the current action is appended before differencing.
    """
    a = np.asarray(a, dtype=float)
    hist = np.asarray(action_history, dtype=float)
    if hist.shape[-2] < 1:
        raise ValueError("action history needs at least one entry")
    seq = np.concatenate([hist, a[..., None, :]], axis=-2)[..., -cfg.window:, :]
    psi = euler_zyx(state.R)[..., 2]
    r_xP = cfg.w_xP * np.exp(-cfg.alpha_xP * norm(state.x_P - ref.x_P_d))
    r_psi = cfg.w_psi * np.exp(-cfg.alpha_psi * np.abs(psi))
    r_Om = cfg.w_Omega * np.exp(-cfg.alpha_Omega * norm(state.Omega))
    r_qd = cfg.w_qdot * np.exp(-cfg.alpha_qdot * cable_rate(state, l))
    r_a = cfg.w_a * np.exp(-cfg.alpha_a * norm(a))
    r_da = cfg.w_da * np.exp(-cfg.alpha_da * action_change_norm(seq, cfg.rho))
    r = r_xP * (1.0 + r_psi + r_Om + r_qd) + r_a + r_da
    return r, np.stack([r_xP, r_psi, r_Om, r_qd, r_a, r_da], axis=-1)


def check_termination(state: SystemState, ref: ReferenceSample, cfg: TerminationConfig) -> np.ndarray:
    """Termination reason per environment (``Termination.NONE`` if alive).

    When several conditions hold the first in enum order is reported.
    """
    ground = state.x_Q[..., 2] < 0.0
    pos = norm(state.x_P - ref.x_P_d) > cfg.eps_pos
    vel = norm(state.v_P - ref.v_P_d) > cfg.eps_vel
    att = np.any(np.abs(euler_zyx(state.R)) > cfg.attitude_limit, axis=-1)
    # euler_zyx keeps |pitch| <= pi/2, so a flipped vehicle shows up in roll
    out = np.full(np.shape(ground), Termination.NONE, dtype=int)
    for cond, reason in ((att, Termination.ATTITUDE), (vel, Termination.VELOCITY),
                         (pos, Termination.POSITION), (ground, Termination.GROUND)):
        out = np.where(cond, int(reason), out)
    return out
