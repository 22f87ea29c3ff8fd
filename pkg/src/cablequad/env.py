"""Batched training/evaluation environment.

Policy rate 100 Hz, simulator 500 Hz (5 substeps per action). Each environment
owns an :class:`RngStream` used for its episode-level draws; per-step sensor
noise and ground-effect directions come from one batch stream, so a run is
deterministic for a fixed seed and a fixed number of environments.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .actuation import RatePidState, init_motor, map_action, mix_to_rotors, motor_and_delay_step, rate_pid_step
from .dynamics import (
    Disturbance,
    SystemParams,
    SystemState,
    ground_effect_force,
    integrate_step,
    make_state,
    stack_params,
)
from .mathcore import E3, RngStream, rot_from_euler_zyx
from .randomization import (
    RandomizationRanges,
    randomize_params,
    sample_impulse_disturbance,
    sample_initial_perturbation,
    sample_slack_gap,
)
from .reference import ReferenceSample, ReferenceSpec, hover_spec, quadrotor_reference, sample_reference, stack_specs
from .reward import RewardConfig, Termination, TerminationConfig, check_termination, compute_reward
from .sensing import (
    ACTION_DIM,
    HistoryBuffer,
    NoiseConfig,
    ObservationConfig,
    ObservationLayout,
    add_sensor_noise,
    assemble_observation,
)

SIM_DT = 0.002
SUBSTEPS = 5
MAX_DELAY_STEPS = 32


@dataclass
class EnvConfig:
    num_envs: int = 16
    episode_time: float = 25.0
    cable_model: str = "compliant"
    nominal: SystemParams = field(default_factory=SystemParams)
    randomize: bool = True
    ranges: RandomizationRanges = field(default_factory=RandomizationRanges)
    reference: str = "random"           # "random" or "hover"
    amp_scale: float = 1.0
    origin: tuple = (0.0, 0.0, 2.5)
    perturb_scale: float = 1.0
    disturbance: bool = True
    ground_effect: bool = True
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    obs: ObservationConfig = field(default_factory=ObservationConfig)
    active_history: int | None = None
    reward: RewardConfig = field(default_factory=RewardConfig)
    termination: TerminationConfig = field(default_factory=TerminationConfig)
    pid: RatePidState = field(default_factory=RatePidState)
    # per-env SystemParams field replacements applied after randomization
    overrides: tuple | None = None
    # per-env fixed references; take precedence over ``reference``
    reference_specs: tuple | None = None

    def __post_init__(self):
        if self.num_envs < 1:
            raise ValueError("need at least one environment")
        if self.overrides is not None and len(self.overrides) != self.num_envs:
            raise ValueError("overrides needs one entry per environment")
        if self.reference_specs is not None and len(self.reference_specs) != self.num_envs:
            raise ValueError("reference_specs needs one entry per environment")
        if self.reference not in ("random", "hover"):
            raise ValueError(f"unknown reference mode {self.reference!r}")
        if self.cable_model not in ("ideal", "compliant"):
            raise ValueError(f"unknown cable model {self.cable_model!r}")

    @property
    def layout(self) -> ObservationLayout:
        return ObservationLayout(self.obs.H, self.obs.F)


@dataclass
class StepInfo:
    done: np.ndarray
    truncated: np.ndarray
    reason: np.ndarray
    terms: np.ndarray
    episode_returns: list = field(default_factory=list)
    episode_lengths: list = field(default_factory=list)
    final_obs: np.ndarray | None = None


class VecEnv:
    """``num_envs`` independent episodes advanced in lock step."""

    def __init__(self, cfg: EnvConfig, seed: int = 0):
        self.cfg = cfg
        n = cfg.num_envs
        root = RngStream(seed)
        self.env_rngs = root.spawn(n)
        self.step_rng = root.spawn(1)[0]
        self.layout = cfg.layout
        self._params: list[SystemParams] = [cfg.nominal] * n
        self._specs: list[ReferenceSpec] = [hover_spec(cfg.episode_time, cfg.origin)] * n
        self._dist: list[Disturbance] = [Disturbance()] * n
        self.t = np.zeros(n)
        self.ep_return = np.zeros(n)
        self.ep_len = np.zeros(n, dtype=int)
        self.hist = HistoryBuffer(cfg.obs.H, (n,))
        self.a_prev = np.zeros((n, ACTION_DIM))
        self.action_hist = np.zeros((n, cfg.reward.window - 1, ACTION_DIM))
        self.state: SystemState | None = None
        self._pending = None
        # optional callable(state, t) invoked after every simulation substep
        self.substep_hook = None
        self._restack()

    # -- episode bookkeeping -------------------------------------------------

    def _restack(self):
        self.params = stack_params(self._params)
        self.spec = stack_specs(self._specs)
        self.dist = Disturbance(
            w_F=np.stack([d.w_F for d in self._dist]), w_M=np.stack([d.w_M for d in self._dist]),
            t_start=np.array([d.t_start for d in self._dist], dtype=float),
            duration=np.array([d.duration for d in self._dist], dtype=float),
        )
        self.l_eff = np.asarray(self.params.l, dtype=float) * self.params.has_payload

    def _draw_episode(self, i: int):
        cfg = self.cfg
        rng = self.env_rngs[i]
        params = randomize_params(cfg.nominal, cfg.ranges, rng) if cfg.randomize else cfg.nominal
        if cfg.overrides is not None and cfg.overrides[i]:
            params = replace(params, **cfg.overrides[i])
        if cfg.reference_specs is not None:
            spec = cfg.reference_specs[i]
        elif cfg.reference == "random":
            spec = sample_reference(rng, cfg.episode_time, cfg.origin, amp_scale=cfg.amp_scale)
        else:
            spec = hover_spec(cfg.episode_time, cfg.origin)
        pert = sample_initial_perturbation(rng, cfg.perturb_scale)
        gap = sample_slack_gap(rng, float(params.l), cfg.ranges) if cfg.randomize else 0.0
        if cfg.disturbance:
            window = (min(8.0, cfg.episode_time), max(min(8.0, cfg.episode_time), cfg.episode_time - 8.0))
            dist = sample_impulse_disturbance(rng, window)
        else:
            dist = Disturbance()
        return params, spec, pert, gap, dist

    def reset(self, mask=None) -> np.ndarray:
        """Start new episodes for ``mask`` (all by default); returns observations."""
        n = self.cfg.num_envs
        mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return self._observe()
        draws = {}
        for i in idx:
            p, s, pert, gap, d = self._draw_episode(int(i))
            self._params[i], self._specs[i], self._dist[i] = p, s, d
            draws[int(i)] = (pert, gap)
        self._restack()
        fresh = self._initial_state(draws)
        self.state = fresh if self.state is None else self.state.select(mask, fresh)
        self.t[mask] = 0.0
        self.ep_return[mask] = 0.0
        self.ep_len[mask] = 0
        self._reset_actuators(mask)
        self.hist.reset(mask)
        return self._observe()

    def _initial_state(self, draws) -> SystemState:
        n = self.cfg.num_envs
        ref = quadrotor_reference(np.zeros(n), self.spec, self.params.m_P, self.l_eff)
        x_P = ref.x_P_d.copy()
        v = np.zeros((n, 3))
        eul = np.zeros((n, 3))
        Om = np.zeros((n, 3))
        length = self.l_eff.copy()
        if self.cfg.cable_model == "compliant":
            length = length + np.where(self.params.has_payload, np.asarray(self.params.m_P) * self.params.g
                                       / np.asarray(self.params.k_c), 0.0)
        for i, (pert, gap) in draws.items():
            x_P[i] += pert.dx
            v[i] = pert.dv
            eul[i] = pert.deuler
            Om[i] = pert.dOmega
            if gap > 0:
                length[i] = self.l_eff[i] - gap
        x_Q = x_P + length[:, None] * E3
        return make_state(x_Q, v, rot_from_euler_zyx(eul), Om, x_P, v, self.params, self.cfg.cable_model)

    def _reset_actuators(self, mask):
        n = self.cfg.num_envs
        hover = np.asarray(self.params.m_total * self.params.g, dtype=float)
        a0 = np.zeros((n, ACTION_DIM))
        a0[:, 0] = np.clip(2.0 * hover / np.asarray(self.params.f_bar) - 1.0, -1.0, 1.0)
        motor = init_motor(self.params, SIM_DT, np.repeat(hover[:, None] / 4.0, 4, axis=1), MAX_DELAY_STEPS)
        pid = self.cfg.pid.reset((n,))
        if not hasattr(self, "motor"):
            self.motor, self.pid = motor, pid
            self.a_prev = a0
            self.action_hist = np.repeat(a0[:, None, :], self.action_hist.shape[1], axis=1)
            return
        m = mask[:, None]
        self.motor.thrust = np.where(m, motor.thrust, self.motor.thrust)
        self.motor.queue = np.where(m[:, :, None], motor.queue, self.motor.queue)
        self.motor.delay_steps = motor.delay_steps
        self.pid.integral = np.where(m, 0.0, self.pid.integral)
        self.pid.prev_error = np.where(m, 0.0, self.pid.prev_error)
        self.pid.primed = np.where(mask, False, self.pid.primed)
        self.a_prev = np.where(m, a0, self.a_prev)
        self.action_hist = np.where(m[:, :, None], a0[:, None, :], self.action_hist)

    # -- observation ---------------------------------------------------------

    def reference(self) -> ReferenceSample:
        return quadrotor_reference(self.t, self.spec, self.params.m_P, self.l_eff)

    def _observe(self) -> np.ndarray:
        noisy = add_sensor_noise(self.state, self.cfg.noise, self.step_rng)
        obs, entry = assemble_observation(noisy, self.spec, self.t, self.hist, self.a_prev, self.params,
                                          self.cfg.obs, self.cfg.active_history)
        self._pending = entry
        return obs

    # -- stepping ------------------------------------------------------------

    def _extra_force(self):
        if not self.cfg.ground_effect:
            return None
        z = self.state.x_Q[:, 2]
        if not np.any(z < 0.5):
            return None
        return ground_effect_force(z, self.step_rng)

    def _advance(self, thrusts_fn: Callable[[int], np.ndarray]):
        for k in range(SUBSTEPS):
            applied = thrusts_fn(k)
            self.state = integrate_step(self.state, applied, self.dist, self.params, SIM_DT, self.t + k * SIM_DT,
                                        self.cfg.cable_model, self._extra_force())
            if self.substep_hook is not None:
                self.substep_hook(self.state, self.t + (k + 1) * SIM_DT)

    def _motor(self, cmd):
        self.motor, applied = motor_and_delay_step(self.motor, cmd, SIM_DT, self.params)
        return applied

    def step(self, actions: np.ndarray):
        """Apply normalized CTBR actions for one policy period."""
        a = np.clip(np.asarray(actions, dtype=float), -1.0, 1.0)
        f, Omega_d = map_action(a, self.params)

        def thrusts(_k):
            M, self.pid = rate_pid_step(self.state.Omega, Omega_d, self.pid, SIM_DT)
            return self._motor(mix_to_rotors(f, M, self.params))

        self._advance(thrusts)
        return self._finish(a)

    def step_wrench(self, controller: Callable[[SystemState, float, "VecEnv"], tuple]):
        """Advance one policy period with a model-based controller at the simulator rate.

        ``controller(state, t, env) -> (f, M)`` bypasses the rate loop but not
        the mixer, rotor lag and delay.
        """
        last = {}

        def thrusts(k):
            f, M = controller(self.state, self.t + k * SIM_DT, self)
            last["a"] = (f, M)
            return self._motor(mix_to_rotors(f, M, self.params))

        self._advance(thrusts)
        f, M = last["a"]
        a = np.zeros((self.cfg.num_envs, ACTION_DIM))
        a[:, 0] = np.clip(2.0 * np.asarray(f) / np.asarray(self.params.f_bar) - 1.0, -1.0, 1.0)
        return self._finish(a)

    def _finish(self, a):
        cfg = self.cfg
        self.hist.push(self._pending)
        self.t = self.t + SIM_DT * SUBSTEPS
        ref = self.reference()
        r, terms = compute_reward(self.state, ref, a, self.action_hist, cfg.reward, self.l_eff)
        reason = check_termination(self.state, ref, cfg.termination)
        terminated = reason != Termination.NONE
        truncated = (self.t >= cfg.episode_time - 1e-9) & ~terminated
        done = terminated | truncated
        self.ep_return += r
        self.ep_len += 1
        self.action_hist = np.concatenate([self.action_hist[:, 1:], a[:, None, :]], axis=1)
        self.a_prev = a
        info = StepInfo(done=done, truncated=truncated, reason=reason, terms=terms)
        if np.any(done):
            info.episode_returns = self.ep_return[done].tolist()
            info.episode_lengths = self.ep_len[done].tolist()
            self.final_state = self.state.copy()
            info.final_obs = self._observe()
            obs = self.reset(done)
        else:
            obs = self._observe()
        return obs, r, done, info
