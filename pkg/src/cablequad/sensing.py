"""Policy observation: noisy present state, body-frame errors, I/O history, preview.

Layout of one observation row::

    [ s_t (26) | e_t (12) | a_{t-1} (4) | history (H * 42) | preview (F * 12) ]
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import SystemParams, SystemState
from .mathcore import RngStream, rmatvec, so3_exp
from .reference import ReferenceSample, ReferenceSpec, quadrotor_reference

STATE_DIM = 26
ERROR_DIM = 12
ACTION_DIM = 4
PRESENT_DIM = STATE_DIM + ERROR_DIM + ACTION_DIM
HIST_ENTRY_DIM = STATE_DIM + 6 + 6 + ACTION_DIM
PREVIEW_ENTRY_DIM = 12
POLICY_DT = 0.01


@dataclass(frozen=True)
class NoiseConfig:
    sigma_x: float = 0.01
    clip_x: float = 0.0025
    sigma_v: float = 0.02
    clip_v: float = 0.005
    sigma_theta: float = np.pi / 60
    clip_theta: float = np.pi / 120
    sigma_Omega: float = np.pi / 30
    clip_Omega: float = np.pi / 60

    @classmethod
    def off(cls) -> NoiseConfig:
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ObservationConfig:
    H: int = 5
    F: int = 5
    x_max: float = 5.0
    v_max: float = 5.0
    include_payload_params: bool = True


@dataclass(frozen=True)
class ObservationLayout:
    H: int
    F: int

    @property
    def hist_dim(self) -> int:
        return self.H * HIST_ENTRY_DIM

    @property
    def preview_dim(self) -> int:
        return self.F * PREVIEW_ENTRY_DIM

    @property
    def size(self) -> int:
        return PRESENT_DIM + self.hist_dim + self.preview_dim

    def split(self, obs: np.ndarray):
        a = PRESENT_DIM
        b = a + self.hist_dim
        return obs[..., :a], obs[..., a:b], obs[..., b:]


def _clipped_gauss(rng: RngStream, sigma: float, clip: float, shape):
    return np.clip(rng.normal(0.0, sigma, size=shape), -clip, clip)


def add_sensor_noise(state: SystemState, cfg: NoiseConfig, rng: RngStream) -> SystemState:
    """Observation-path copy of ``state`` with clipped Gaussian noise.

    Both bodies receive independent position/velocity noise. The attitude is
    perturbed on the right by a small clipped rotation.
    """
    noisy = state.copy()
    shape = np.shape(state.x_Q)
    if cfg.sigma_x > 0:
        noisy.x_Q = state.x_Q + _clipped_gauss(rng, cfg.sigma_x, cfg.clip_x, shape)
        noisy.x_P = state.x_P + _clipped_gauss(rng, cfg.sigma_x, cfg.clip_x, shape)
    if cfg.sigma_v > 0:
        noisy.v_Q = state.v_Q + _clipped_gauss(rng, cfg.sigma_v, cfg.clip_v, shape)
        noisy.v_P = state.v_P + _clipped_gauss(rng, cfg.sigma_v, cfg.clip_v, shape)
    if cfg.sigma_theta > 0:
        eta = _clipped_gauss(rng, cfg.sigma_theta, cfg.clip_theta, shape)
        noisy.R = state.R @ so3_exp(eta)
    if cfg.sigma_Omega > 0:
        noisy.Omega = state.Omega + _clipped_gauss(rng, cfg.sigma_Omega, cfg.clip_Omega, shape)
    return noisy


def tracking_error(state: SystemState, ref: ReferenceSample) -> np.ndarray:
    """Body-frame errors (actual - desired): payload pos/vel, quadrotor pos/vel."""
    R = state.R
    return np.concatenate([
        rmatvec(R, state.x_P - ref.x_P_d),
        rmatvec(R, state.v_P - ref.v_P_d),
        rmatvec(R, state.x_Q - ref.x_Q_d),
        rmatvec(R, state.v_Q - ref.v_Q_d),
    ], axis=-1)


def normalized_state(state: SystemState, params: SystemParams, cfg: ObservationConfig) -> np.ndarray:
    shape = np.shape(state.x_Q)[:-1]
    m_P = np.broadcast_to(np.asarray(params.m_P, dtype=float), shape)
    l = np.broadcast_to(np.asarray(params.l, dtype=float), shape)
    if not cfg.include_payload_params:
        m_P = np.zeros(shape)
        l = np.zeros(shape)
    return np.concatenate([
        state.x_Q / cfg.x_max,
        np.reshape(state.R, shape + (9,)),
        state.x_P / cfg.x_max,
        state.v_Q / cfg.v_max,
        state.Omega,
        state.v_P / cfg.v_max,
        m_P[..., None],
        l[..., None],
    ], axis=-1)


class HistoryBuffer:
    """Fixed-length chronological buffer, oldest entry first, zero padded."""

    def __init__(self, capacity: int, batch_shape=()):
        self.capacity = capacity
        self.data = np.zeros(tuple(batch_shape) + (capacity, HIST_ENTRY_DIM))
        self.count = np.zeros(tuple(batch_shape), dtype=int)

    def push(self, entry: np.ndarray) -> None:
        if self.capacity == 0:
            return
        self.data = np.concatenate([self.data[..., 1:, :], np.asarray(entry)[..., None, :]], axis=-2)
        self.count = np.minimum(self.count + 1, self.capacity)

    def reset(self, mask=None) -> None:
        if mask is None:
            self.data[...] = 0.0
            self.count[...] = 0
        else:
            self.data[mask] = 0.0
            self.count[mask] = 0

    def flat(self, active: int | None = None) -> np.ndarray:
        """Flattened buffer; entries older than ``active`` steps are zeroed."""
        d = self.data
        if active is not None and active < self.capacity:
            d = d.copy()
            d[..., : self.capacity - active, :] = 0.0
        return d.reshape(d.shape[:-2] + (self.capacity * HIST_ENTRY_DIM,))


def history_entry(present_state: np.ndarray, ref: ReferenceSample, a_prev: np.ndarray,
                  cfg: ObservationConfig) -> np.ndarray:
    return np.concatenate([
        present_state,
        ref.x_Q_d / cfg.x_max, ref.x_P_d / cfg.x_max,
        ref.v_Q_d / cfg.v_max, ref.v_P_d / cfg.v_max,
        a_prev,
    ], axis=-1)


def preview_block(state: SystemState, spec: ReferenceSpec, t, F: int, params: SystemParams) -> np.ndarray:
    """Body-frame differences to the next ``F`` references at policy spacing."""
    if F == 0:
        return np.zeros(np.shape(state.x_Q)[:-1] + (0,))
    l = np.asarray(params.l, dtype=float) * params.has_payload
    ks = np.arange(1, F + 1) * POLICY_DT
    t = np.asarray(t, dtype=float)
    tt = t[..., None] + ks                                   # (..., F)
    spec_b = _expand_spec(spec, F) if np.ndim(spec.A) > 1 else spec
    ref = quadrotor_reference(tt, spec_b, params.m_P, np.asarray(l)[..., None])
    R = state.R[..., None, :, :]
    blocks = [
        rmatvec(R, state.x_P[..., None, :] - ref.x_P_d),
        rmatvec(R, state.v_P[..., None, :] - ref.v_P_d),
        rmatvec(R, state.x_Q[..., None, :] - ref.x_Q_d),
        rmatvec(R, state.v_Q[..., None, :] - ref.v_Q_d),
    ]
    shape = np.shape(state.x_Q)[:-1]
    return np.concatenate([b.reshape(shape + (3 * F,)) for b in blocks], axis=-1)


def _expand_spec(spec: ReferenceSpec, F: int) -> ReferenceSpec:
    """Insert a preview axis so a batched spec broadcasts against (N, F) times."""
    def ex(x):
        x = np.asarray(x, dtype=float)
        return x[:, None, ...] if x.ndim >= 1 else x
    return replace(spec, A=ex(spec.A), freq=ex(spec.freq), phase=ex(spec.phase), origin=ex(spec.origin),
                   t_s=ex(spec.t_s), t_e=ex(spec.t_e), Delta=ex(spec.Delta), t_f=ex(spec.t_f))


def assemble_observation(noisy: SystemState, spec: ReferenceSpec, t, hist: HistoryBuffer, a_prev: np.ndarray,
                         params: SystemParams, cfg: ObservationConfig = ObservationConfig(),
                         active_history: int | None = None):
    """Build the observation from the (noisy) state.

    Returns ``(obs, entry)``; ``entry`` is what the caller pushes into the
    history after acting, so the next observation sees it as the newest past step.
    """
    l = np.asarray(params.l, dtype=float) * params.has_payload
    ref = quadrotor_reference(t, spec, params.m_P, l)
    s = normalized_state(noisy, params, cfg)
    e = tracking_error(noisy, ref)
    a_prev = np.asarray(a_prev, dtype=float)
    parts = [s, e, a_prev, hist.flat(active_history), preview_block(noisy, spec, t, cfg.F, params)]
    obs = np.concatenate(parts, axis=-1)
    expected = ObservationLayout(hist.capacity, cfg.F).size
    if obs.shape[-1] != expected:
        raise ValueError(f"observation length {obs.shape[-1]} != layout length {expected}")
    return obs, history_entry(s, ref, a_prev, cfg)
