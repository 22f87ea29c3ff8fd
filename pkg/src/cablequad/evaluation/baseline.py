"""Geometric SE(3) tracking controller used as a model-based reference point."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dynamics import SystemParams, SystemState
from ..mathcore import E1, E3, cross, matvec, vee
from ..reference import ReferenceSample


@dataclass(frozen=True)
class BaselineGains:
    K_x: float = 8.0
    K_v: float = 4.0
    K_R: float = 0.3
    K_Omega: float = 0.05
    # horizontal feedback on the payload's offset from the quadrotor (1/s^2, 1/s)
    K_swing_p: float = 2.0
    K_swing_v: float = 0.0


def geometric_baseline_control(state: SystemState, ref: ReferenceSample, gains: BaselineGains,
                               params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Collective thrust and body moment for the quadrotor reference.

    The payload hangs from the quadrotor, so the outer loop compensates the
    full system mass and tracks ``x_Q_d``. Swing terms move the quadrotor
    toward the payload's horizontal offset and relative velocity, which damps
    the pendulum mode.
    """
    m = np.asarray(params.m_total, dtype=float)[..., None]
    g = params.g
    e_x = ref.x_Q_d - state.x_Q
    e_v = ref.v_Q_d - state.v_Q
    F_d = m * (ref.a_Q_d + g * E3) + gains.K_x * e_x + gains.K_v * e_v
    d = (state.x_P - state.x_Q) - (ref.x_P_d - ref.x_Q_d)
    dv = (state.v_P - state.v_Q) - (ref.v_P_d - ref.v_Q_d)
    swing = gains.K_swing_p * d + gains.K_swing_v * dv
    F_d = F_d + m * (swing - swing[..., 2:3] * E3)
    b3 = state.R[..., :, 2]
    f = np.sum(F_d * b3, axis=-1)
    b3_d = F_d / np.linalg.norm(F_d, axis=-1, keepdims=True)
    b2_d = cross(b3_d, np.broadcast_to(E1, b3_d.shape))
    b2_d /= np.linalg.norm(b2_d, axis=-1, keepdims=True)
    b1_d = cross(b2_d, b3_d)
    R_d = np.stack([b1_d, b2_d, b3_d], axis=-1)
    Rt = np.swapaxes(state.R, -1, -2)
    e_R = 0.5 * vee(np.swapaxes(R_d, -1, -2) @ state.R - Rt @ R_d)
    e_Om = state.Omega
    J = np.asarray(params.J_Q, dtype=float)
    M = -gains.K_R * e_R - gains.K_Omega * e_Om + cross(state.Omega, matvec(J, state.Omega))
    f = np.clip(f, 0.0, np.asarray(params.f_bar, dtype=float))
    return f, M
