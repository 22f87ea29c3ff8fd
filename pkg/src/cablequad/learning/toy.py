"""Two-armed bandit with one-step episodes, for PPO sanity checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..env import StepInfo


@dataclass(frozen=True)
class _ObsCfg:
    H: int = 0
    F: int = 0


@dataclass(frozen=True)
class BanditConfig:
    num_envs: int = 16
    obs_dim: int = 42
    obs: _ObsCfg = _ObsCfg()


class BanditEnv:
    """Arm A (reward 1) is chosen when the first action component is positive."""

    def __init__(self, cfg: BanditConfig = BanditConfig(), seed: int = 0):
        self.cfg = cfg
        self._obs = np.zeros((cfg.num_envs, cfg.obs_dim))

    def reset(self, mask=None) -> np.ndarray:
        return self._obs.copy()

    def step(self, actions):
        r = (np.asarray(actions)[:, 0] > 0).astype(float)
        done = np.ones(self.cfg.num_envs, dtype=bool)
        info = StepInfo(done=done, truncated=np.zeros_like(done), reason=np.zeros(len(done), dtype=int),
                        terms=np.zeros((len(done), 0)), episode_returns=r.tolist(),
                        episode_lengths=[1] * len(done))
        return self._obs.copy(), r, done, info


def arm_a_probability(params, obs_dim: int = 42) -> float:
    """P(first pre-squash action component > 0) under the Gaussian policy."""
    from math import erf, sqrt

    from .network import forward
    mu = forward(params, np.zeros((1, obs_dim))).mu[0, 0]
    std = float(np.exp(params.view("log_std")[0]))
    return 0.5 * (1.0 + erf(mu / (std * sqrt(2.0))))
