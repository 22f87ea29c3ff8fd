import numpy as np
import pytest

from cablequad.learning.network import NetworkSpec, init_params
from cablequad.learning.ppo import TrainResult
from cablequad.mathcore import RngStream
from cablequad.tasks import HoverCheck, evaluate_hover, hover_task, return_improvement


def test_hover_task_is_payload_free_and_noiseless():
    cfg = hover_task()
    assert cfg.env.reference == "hover" and cfg.env.ranges.m_P_range == (0.0, 0.0)
    assert cfg.env.noise.sigma_x == 0.0 and cfg.ppo.num_envs == cfg.env.num_envs == 16
    # about half a million environment steps
    assert cfg.train.iterations * cfg.ppo.steps_per_iter * cfg.env.num_envs == pytest.approx(5e5, rel=0.01)


def test_return_improvement():
    log = [{"mean_return": 100.0}, {"mean_return": 250.0}, {"mean_return": 200.0}]
    p = init_params(NetworkSpec(H=0, F=0, hist_embed=2, prev_embed=2, hidden=(4,)), RngStream(0))
    res = TrainResult(log=log, checkpoints=[], best_params=p, best_iter=2, final_params=p)
    assert return_improvement(res) == pytest.approx(1.5)


def test_hover_check():
    assert HoverCheck(np.array([3.0, 4.0]), np.zeros(2)).holds()
    assert not HoverCheck(np.array([3.0, 2.9]), np.zeros(2)).holds()


def test_untrained_policy_does_not_hold_hover():
    cfg = hover_task()
    spec = NetworkSpec(H=cfg.env.obs.H, F=cfg.env.obs.F, hist_embed=4, prev_embed=4, hidden=(8, 8))
    chk = evaluate_hover(init_params(spec, RngStream(0)), num_envs=2)
    assert chk.hold_times.shape == (2,) and not chk.holds()
