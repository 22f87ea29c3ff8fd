"""Evaluation scenarios: tracking endpoints, hover recovery, slack-taut drop,
(m_P, l) grid sweep and history-length ablation.

Every scenario runs a batch of environments in lock step, logs at the 100 Hz
control rate (the drop scenario logs at the 500 Hz simulation rate) and
stops logging an environment at its first termination.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..dynamics import TRAJECTORY_COLUMNS, CableMode, SystemParams, make_state, trajectory_row, write_csv
from ..env import SIM_DT, SUBSTEPS, EnvConfig, VecEnv
from ..learning.network import PolicyParams, policy_act
from ..mathcore import E3
from ..randomization import RandomizationRanges
from ..reference import quadrotor_reference
from ..reward import Termination
from ..sensing import NoiseConfig, ObservationConfig
from .baseline import BaselineGains, geometric_baseline_control
from .metrics import METRIC_COLUMNS, TrackingMetrics, rms_error_norm, rmse_metrics, settling_metrics

SCENARIOS = ("track_no_payload", "track_payload", "hover_recovery", "slack_taut_drop",
             "grid_sweep", "history_ablation")
CONTROL_DT = SIM_DT * SUBSTEPS


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs shared by all scenarios; defaults follow the evaluation protocols."""

    duration: float = 20.0
    hover_duration: float = 10.0
    seeds: int = 1
    m_P: float = 0.2
    l: float = 1.0
    amp_scale: float = 1.0
    noise: bool = True
    disturbance: bool = False
    cable_model: str = "compliant"
    grid_m_P: tuple = (0.0, 0.05, 0.1, 0.15, 0.2)
    grid_l: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    histories: tuple = (0, 1, 5, 10)
    drop_gap: float = 0.3
    drop_duration: float = 4.0
    settle_eps: float = 0.01
    settle_tau: float = 0.5
    log_every: int = 1
    gains: BaselineGains = field(default_factory=BaselineGains)
    nominal: SystemParams = field(default_factory=SystemParams)

    def __post_init__(self):
        if self.duration <= 0 or self.hover_duration <= self.settle_tau:
            raise ValueError("durations must be positive and exceed the dwell time")
        if self.seeds < 1 or self.log_every < 1:
            raise ValueError("seeds and log_every must be positive")


# -- controllers ------------------------------------------------------------


class BaselineController:
    """Geometric tracking law evaluated at the simulator rate."""

    name = "baseline"

    def __init__(self, gains: BaselineGains):
        self.gains = gains

    def step(self, env: VecEnv, obs):
        def law(state, t, e):
            ref = quadrotor_reference(t, e.spec, e.params.m_P, e.l_eff)
            return geometric_baseline_control(state, ref, self.gains, e.params)

        return env.step_wrench(law)


class PolicyController:
    """Deterministic (mean-action) learned policy."""

    name = "policy"

    def __init__(self, params: PolicyParams):
        self.params = params

    def step(self, env: VecEnv, obs):
        a, _, _, _ = policy_act(self.params, obs, deterministic=True)
        return env.step(a)


def make_controller(policy: PolicyParams | None, cfg: ScenarioConfig):
    return BaselineController(cfg.gains) if policy is None else PolicyController(policy)


# -- results ----------------------------------------------------------------

RESULT_COLUMNS = ["scenario", "controller", "env", "seed", "m_P", "l", "H", "termination", "steps"] + METRIC_COLUMNS
LOG_COLUMNS = ["env"] + TRAJECTORY_COLUMNS + ["x_P_d", "y_P_d", "z_P_d"]


@dataclass
class ScenarioResult:
    name: str
    rows: list                 # RESULT_COLUMNS-aligned
    log: list                  # LOG_COLUMNS-aligned
    events: list = field(default_factory=list)

    @property
    def metrics(self) -> list[TrackingMetrics]:
        k = RESULT_COLUMNS.index("rmse_x")
        out = []
        for r in self.rows:
            v = [None if (isinstance(x, float) and np.isnan(x)) else x for x in r[k:]]
            out.append(TrackingMetrics(*v))
        return out

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / f"{self.name}_metrics.csv", RESULT_COLUMNS, self.rows)
        write_csv(out / f"{self.name}_trajectory.csv", LOG_COLUMNS, self.log)
        if self.events:
            write_csv(out / f"{self.name}_events.csv", ["t", "event"], self.events)


# -- batched episode runner -------------------------------------------------


def _env_config(cfg: ScenarioConfig, n: int, reference: str, duration: float, overrides, perturb: float,
                policy: PolicyParams | None, active_history=None) -> EnvConfig:
    H = policy.spec.H if policy is not None else 0
    F = policy.spec.F if policy is not None else 0
    return EnvConfig(
        num_envs=n, episode_time=duration, cable_model=cfg.cable_model, nominal=cfg.nominal, randomize=False,
        ranges=RandomizationRanges.none(cfg.nominal), reference=reference, amp_scale=cfg.amp_scale,
        perturb_scale=perturb, disturbance=cfg.disturbance, ground_effect=False,
        noise=NoiseConfig() if cfg.noise else NoiseConfig.off(), obs=ObservationConfig(H=H, F=F),
        active_history=active_history, overrides=tuple(overrides),
    )


def _tracked(state, has_payload):
    return np.where(np.asarray(has_payload)[:, None], state.x_P, state.x_Q)


def _run_batch(env: VecEnv, controller, steps: int, log_every: int):
    """Roll ``steps`` control periods; returns per-env series and termination reasons."""
    n = env.cfg.num_envs
    obs = env.reset()
    alive = np.ones(n, dtype=bool)
    reason = np.zeros(n, dtype=int)
    length = np.zeros(n, dtype=int)
    actual, desired, rows = [], [], []
    for k in range(steps):
        obs, _, done, info = controller.step(env, obs)
        state = env.state
        if np.any(done):
            # auto-reset already replaced finished envs; log their last state
            state = env.state.select(done, env.final_state)
        t_now = (k + 1) * CONTROL_DT
        ref = quadrotor_reference(np.full(n, t_now), env.spec, env.params.m_P, env.l_eff)
        actual.append(_tracked(state, env.params.has_payload))
        desired.append(ref.x_P_d)
        length += alive
        if k % log_every == 0:
            M = np.zeros((n, 3))
            f = 0.5 * (np.asarray(env.a_prev)[:, 0] + 1.0) * np.asarray(env.params.f_bar)
            for i in np.flatnonzero(alive):
                rows.append([i] + trajectory_row(t_now, state[i], f[i], M[i]) + list(map(float, ref.x_P_d[i])))
        newly = alive & done & ~info.truncated
        reason[newly] = info.reason[newly]
        alive &= ~done
        if not alive.any():
            break
    return np.array(actual), np.array(desired), length, reason, rows


def _metrics(actual, desired, n_valid, l, cfg: ScenarioConfig, settle: bool) -> TrackingMetrics:
    a, d = actual[:n_valid], desired[:n_valid]
    per_axis, total = rmse_metrics(a, d)
    m = TrackingMetrics(*map(float, per_axis), total, rms_error_norm(a, d))
    if settle:
        e = np.linalg.norm(a - d, axis=-1)
        if len(e) * CONTROL_DT >= cfg.settle_tau + CONTROL_DT:
            m.T_s, m.T_s_over_T_n, m.e_ss = settling_metrics(e, CONTROL_DT, l, cfg.settle_eps, cfg.settle_tau)
    return m


def _evaluate(name, cfg, policy, cells, reference, duration, perturb, seed, settle, active_history=None, H_label=None):
    """``cells`` lists ``(m_P, l, seed_index)`` per environment."""
    overrides = [{"m_P": m, "l": l} for m, l, _ in cells]
    env_cfg = _env_config(cfg, len(cells), reference, duration, overrides, perturb, policy, active_history)
    env = VecEnv(env_cfg, seed=seed)
    ctrl = make_controller(policy, cfg)
    steps = int(round(duration / CONTROL_DT))
    actual, desired, length, reason, log = _run_batch(env, ctrl, steps, cfg.log_every)
    H = H_label if H_label is not None else (policy.spec.H if policy is not None else 0)
    rows = []
    for i, (m_P, l, s) in enumerate(cells):
        m = _metrics(actual[:, i], desired[:, i], int(length[i]), l, cfg, settle)
        rows.append([name, ctrl.name, i, s, float(m_P), float(l), H, Termination(int(reason[i])).name.lower(),
                     int(length[i])] + m.row())
    return rows, log


def run_episode(env_cfg: EnvConfig, seed: int = 0, policy: PolicyParams | None = None,
                gains: BaselineGains | None = None, name: str = "simulate", log_every: int = 1,
                settle: tuple = (0.01, 0.5)) -> ScenarioResult:
    """One batch of episodes under an arbitrary environment configuration."""
    if policy is not None and policy.spec.obs_dim != env_cfg.layout.size:
        raise ValueError(f"policy expects {policy.spec.obs_dim} observations, environment provides "
                         f"{env_cfg.layout.size}")
    env = VecEnv(env_cfg, seed=seed)
    ctrl = BaselineController(gains or BaselineGains()) if policy is None else PolicyController(policy)
    steps = int(round(env_cfg.episode_time / CONTROL_DT))
    actual, desired, length, reason, log = _run_batch(env, ctrl, steps, log_every)
    scfg = ScenarioConfig(settle_eps=settle[0], settle_tau=settle[1])
    rows = []
    for i in range(env_cfg.num_envs):
        l = float(env.l_eff[i])
        m = _metrics(actual[:, i], desired[:, i], int(length[i]), l, scfg, settle=True)
        H = policy.spec.H if policy is not None else 0
        rows.append([name, ctrl.name, i, seed, float(np.asarray(env.params.m_P)[i]), l, H,
                     Termination(int(reason[i])).name.lower(), int(length[i])] + m.row())
    return ScenarioResult(name, rows, log)


def _seeds(cfg):
    return range(cfg.seeds)


def run_scenario(name: str, cfg: ScenarioConfig | None = None, seed: int = 0,
                 policy: PolicyParams | None = None) -> ScenarioResult:
    """Run a named scenario with the learned ``policy`` or, if ``None``, the geometric baseline."""
    cfg = cfg or ScenarioConfig()
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    if name == "slack_taut_drop":
        return _slack_taut_drop(cfg, seed)
    if name in ("track_no_payload", "track_payload"):
        m_P, l = (0.0, 0.0) if name == "track_no_payload" else (0.2, 1.0)
        cells = [(m_P, l, s) for s in _seeds(cfg)]
        rows, log = _evaluate(name, cfg, policy, cells, "random", cfg.duration, 0.0, seed, settle=False)
    elif name == "hover_recovery":
        cells = [(cfg.m_P, cfg.l, s) for s in _seeds(cfg)]
        rows, log = _evaluate(name, cfg, policy, cells, "hover", cfg.hover_duration, 1.0, seed, settle=True)
    elif name == "grid_sweep":
        cells = [(m, l, s) for m in cfg.grid_m_P for l in cfg.grid_l for s in _seeds(cfg)]
        rows, log = _evaluate(name, cfg, policy, cells, "random", cfg.duration, 0.0, seed, settle=False)
    else:
        rows, log = [], []
        top = policy.spec.H if policy is not None else max(cfg.histories)
        for h in cfg.histories:
            cells = [(cfg.m_P, cfg.l, s) for s in _seeds(cfg)]
            # a single policy is evaluated with its history truncated to h entries
            r, lg = _evaluate(name, cfg, policy, cells, "random", cfg.duration, 0.0, seed, settle=False,
                              active_history=min(h, top), H_label=h)
            rows += r
            log += [[f"H{h}:{row[0]}"] + row[1:] for row in lg]
    return ScenarioResult(name, rows, log)


# -- slack-taut drop --------------------------------------------------------


def _slack_taut_drop(cfg: ScenarioConfig, seed: int) -> ScenarioResult:
    """Payload released ``drop_gap`` inside the cable length under a holding quadrotor.

    The baseline holds hover while the payload free-falls, snaps the cable
    taut, bounces back into slack and settles. Logged at the simulation rate.
    """
    m_P, l = cfg.m_P, cfg.l
    if m_P <= 0 or l <= cfg.drop_gap:
        raise ValueError("drop scenario needs a payload and a cable longer than the drop gap")
    overrides = [{"m_P": m_P, "l": l}]
    env_cfg = replace(_env_config(cfg, 1, "hover", cfg.drop_duration, overrides, 0.0, None), noise=NoiseConfig.off())
    env = VecEnv(env_cfg, seed=seed)
    env.reset()
    s0 = env.state
    x_P = s0.x_Q - (l - cfg.drop_gap) * E3
    zeros = np.zeros_like(s0.v_Q)
    env.state = make_state(s0.x_Q, zeros, s0.R, zeros, x_P, zeros, env.params, cfg.cable_model)
    ctrl = BaselineController(cfg.gains)
    log, events = [], []
    prev = {"mode": int(env.state.mode[0])}
    ref_x = quadrotor_reference(np.zeros(1), env.spec, env.params.m_P, env.l_eff).x_P_d[0]

    def hook(state, t):
        t = float(t[0])
        mode = int(state.mode[0])
        if mode != prev["mode"]:
            events.append([t, f"{CableMode(prev['mode']).name.lower()}->{CableMode(mode).name.lower()}"])
            prev["mode"] = mode
        log.append([0] + trajectory_row(t, state[0], float("nan"), np.zeros(3)) + list(map(float, ref_x)))

    env.substep_hook = hook
    log.append([0] + _row0(env) + list(map(float, ref_x)))
    obs = None
    for _ in range(int(round(cfg.drop_duration / CONTROL_DT))):
        obs, _, done, info = ctrl.step(env, obs)
        if done[0]:
            break
    env.substep_hook = None
    k = LOG_COLUMNS.index("x_P")
    pos = np.array([r[k: k + 3] for r in log], dtype=float)
    e = np.linalg.norm(pos - ref_x, axis=1)
    n_tau = int(round(cfg.settle_tau / SIM_DT))
    T_s, ratio, e_ss = settling_metrics(e, SIM_DT, l, cfg.settle_eps, cfg.settle_tau) if len(e) > n_tau else (None,) * 3
    des = np.broadcast_to(ref_x, pos.shape)
    per_axis, total = rmse_metrics(pos, des)
    m = TrackingMetrics(*map(float, per_axis), total, rms_error_norm(pos, des), T_s, ratio, e_ss)
    row = ["slack_taut_drop", "baseline", 0, 0, m_P, l, 0, "none", len(log) - 1] + m.row()
    return ScenarioResult("slack_taut_drop", [row], log, events)


def _row0(env):
    return trajectory_row(0.0, env.state[0], float("nan"), np.zeros(3))


def drop_phases(events: list) -> dict:
    """Phase structure of a drop log: free-fall, bounce (re-slack) count, final mode."""
    kinds = [e[1] for e in events]
    taut = [e[0] for e in events if e[1] == "slack->taut"]
    slack = [e[0] for e in events if e[1] == "taut->slack"]
    bounces = sum(1 for t in slack if taut and t > taut[0])
    return {
        "free_fall_end": taut[0] if taut else None,
        "bounces": bounces,
        "settled_taut": bool(kinds) and kinds[-1] == "slack->taut",
        "events": len(kinds),
    }
