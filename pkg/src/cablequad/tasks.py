"""Canned training tasks.

``HOVER_TASK_INI`` is the scaled-down quadrotor-only hover task: no payload,
noise off, narrow randomization, 5 s episodes. 61 iterations of 16 x 512
steps give about 500k environment steps.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import RunConfig, load_config
from .env import VecEnv
from .learning.network import PolicyParams, policy_act
from .learning.ppo import TrainResult, train_loop

HOVER_TASK_INI = """\
[env]
num_envs = 16
episode_time = 5.0
reference = hover
disturbance = false
ground_effect = false
perturb_scale = 0.5

[noise]
sigma_x = 0.0
sigma_v = 0.0
sigma_theta = 0.0
sigma_Omega = 0.0

[randomization]
mass_scale = 0.02
inertia_scale = 0.02
inertia_tilt_max = 0.0
com_offset_max = 0.0
gear_scale = 0.0
m_P_range = 0.0, 0.0
l_range = 0.0, 0.0
rotor_tau_scale = 0.0
delay_range = 0.02, 0.02
slack_probability = 0.0

[ppo]
steps_per_iter = 512

[train]
iterations = 61
checkpoint_every = 10
"""


def hover_task() -> RunConfig:
    return load_config(text=HOVER_TASK_INI)


def train_hover(seed: int, iterations: int | None = None, verbose: bool = False) -> TrainResult:
    cfg = hover_task()
    iters = cfg.train.iterations if iterations is None else iterations
    return train_loop(lambda s: VecEnv(cfg.env, seed=s), cfg.ppo, iters, seed, net_spec=cfg.network,
                      checkpoint_every=cfg.train.checkpoint_every, verbose=verbose)


@dataclass
class HoverCheck:
    hold_times: np.ndarray      # longest in-band streak per evaluation episode, s
    final_errors: np.ndarray    # position error at the end of the episode, m

    def holds(self, min_hold: float = 3.0) -> bool:
        return bool(np.all(self.hold_times >= min_hold))


def evaluate_hover(params: PolicyParams, seed: int = 10_000, num_envs: int = 8,
                   band: float = 0.1) -> HoverCheck:
    """Deterministic rollouts of the hover task from perturbed starts.

    Returns the longest contiguous stretch with ``|x_Q - x_Q_d| < band`` per
    episode. Episodes that terminate early count only their flown samples.
    """
    cfg = replace(hover_task().env, num_envs=num_envs)
    env = VecEnv(cfg, seed=seed)
    obs = env.reset()
    dt = 0.01
    steps = int(round(cfg.episode_time / dt)) - 1  # the last step triggers the auto-reset
    run = np.zeros(num_envs)
    best = np.zeros(num_envs)
    alive = np.ones(num_envs, dtype=bool)
    err = np.zeros(num_envs)
    for _ in range(steps):
        a, _, _, _ = policy_act(params, obs, deterministic=True)
        obs, _, done, _ = env.step(a)
        err = np.linalg.norm(env.state.x_Q - env.reference().x_Q_d, axis=1)
        alive &= ~done
        inside = alive & (err < band)
        run = np.where(inside, run + dt, 0.0)
        best = np.maximum(best, run)
    return HoverCheck(hold_times=best, final_errors=np.where(alive, err, np.inf))


def return_improvement(result: TrainResult) -> float:
    """Relative gain of the best iteration's mean return over iteration 1."""
    first = result.log[0]["mean_return"]
    best = max(row["mean_return"] for row in result.log)
    return (best - first) / abs(first)
