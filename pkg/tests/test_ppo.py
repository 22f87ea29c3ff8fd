import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cablequad.learning import checkpoint
from cablequad.learning.network import NetworkSpec, PolicyParams, init_params
from cablequad.learning.ppo import (
    Adam,
    NonFiniteLoss,
    PPOConfig,
    RolloutBatch,
    RunningMeanStd,
    collect_rollout,
    gae_advantages,
    ppo_update,
    train_loop,
)
from cablequad.learning.toy import BanditConfig, BanditEnv, arm_a_probability
from cablequad.mathcore import RngStream

SPEC = NetworkSpec(H=0, F=0, hist_embed=3, prev_embed=3, hidden=(8, 8))
CFG = PPOConfig(num_envs=8, steps_per_iter=8, epochs=2, minibatches=2, lr=1e-2)


def _brute_gae(r, v, d, nv, gamma, lam):
    T = len(r)
    adv = np.zeros(T)
    for t in range(T):
        total, w = 0.0, 1.0
        for k in range(t, T):
            total += w * (r[k] + gamma * nv[k] - v[k])
            if d[k]:
                break
            w *= gamma * lam
        adv[t] = total
    return adv


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_gae_matches_brute_force(T, seed):
    rng = np.random.default_rng(seed)
    r = rng.normal(size=(T, 1))
    v = rng.normal(size=(T, 1))
    d = rng.random((T, 1)) < 0.3
    nv = np.where(d, 0.0, rng.normal(size=(T, 1)))
    adv, ret = gae_advantages(r, v, d, nv, 0.97, 0.9)
    np.testing.assert_allclose(adv[:, 0], _brute_gae(r[:, 0], v[:, 0], d[:, 0], nv[:, 0], 0.97, 0.9), atol=1e-12)
    np.testing.assert_allclose(ret, adv + v)


def test_running_mean_std_matches_numpy():
    rng = np.random.default_rng(0)
    chunks = [rng.normal(3.0, 2.0, size=(n, 5)) for n in (7, 1, 40, 13)]
    rms = RunningMeanStd((5,), eps=0.0 + 1e-12)
    for c in chunks:
        rms.update(c)
    full = np.concatenate(chunks)
    np.testing.assert_allclose(rms.mean, full.mean(axis=0), rtol=1e-9)
    np.testing.assert_allclose(rms.var, full.var(axis=0), rtol=1e-6)


def _batch(params, seed=0):
    env = BanditEnv(BanditConfig(num_envs=8))
    return collect_rollout(env, params, env.reset(), 8, RngStream(seed))[0]


def test_first_minibatch_ratio_is_one():
    p = init_params(SPEC, RngStream(0))
    batch = _batch(p)
    for cfg in (CFG, PPOConfig(**{**CFG.__dict__, "precision": "float64"})):
        _, st = ppo_update(p, _batch(p), cfg, Adam(cfg.lr), RngStream(1))
        np.testing.assert_allclose(st["first_ratio"], 1.0, atol=1e-6)
    assert batch.obs.shape == (8, 8, SPEC.obs_dim)


def test_non_finite_loss_aborts():
    p = init_params(SPEC, RngStream(0))
    batch = _batch(p)
    batch.rewards[0, 0] = np.nan
    with pytest.raises(NonFiniteLoss):
        ppo_update(p, batch, CFG, Adam(CFG.lr), RngStream(1))


def test_batch_alignment_checked():
    z = np.zeros((3, 2))
    with pytest.raises(ValueError):
        RolloutBatch(obs=np.zeros((2, 2, 4)), u=np.zeros((3, 2, 4)), logp=z, rewards=z, values=z,
                     dones=z.astype(bool), next_values=z)


def test_zero_iterations_keeps_initial_checkpoint():
    res = train_loop(lambda s: BanditEnv(BanditConfig(num_envs=8), s), CFG, 0, seed=3, net_spec=SPEC)
    assert [it for it, _ in res.checkpoints] == [0] and res.log == []
    init = init_params(SPEC, RngStream(3).spawn(3)[0])
    np.testing.assert_array_equal(checkpoint.from_bytes(res.checkpoints[0][1])[0].flat, init.flat)


def test_training_is_reproducible_and_learns_the_bandit(tmp_path):
    run = lambda: train_loop(lambda s: BanditEnv(BanditConfig(num_envs=8), s), CFG, 15, seed=4,  # noqa: E731
                             net_spec=SPEC, checkpoint_every=5)
    a, b = run(), run()
    assert [c for _, c in a.checkpoints] == [c for _, c in b.checkpoints]
    assert [it for it, _ in a.checkpoints] == [0, 5, 10, 15]
    assert arm_a_probability(a.final_params) > arm_a_probability(init_params(SPEC, RngStream(0)))
    assert a.log[-1]["mean_return"] > a.log[0]["mean_return"]


def test_config_validation():
    with pytest.raises(ValueError):
        PPOConfig(gamma=1.5)
    with pytest.raises(ValueError):
        PPOConfig(precision="float16")
    with pytest.raises(ValueError):
        PPOConfig(epochs=0)


def test_ratio_above_clip_uses_clipped_objective():
    from cablequad.learning.network import forward, squashed_logp
    from cablequad.learning.ppo import ppo_loss_and_grad

    p = init_params(SPEC, RngStream(0))
    obs = np.zeros((1, SPEC.obs_dim))
    u = np.zeros((1, 4))
    logp = squashed_logp(u, forward(p, obs).mu, p.view("log_std"))
    cfg = PPOConfig(clip_eps=0.2, precision="float64")
    ret = forward(p, obs).value
    _, grad, st = ppo_loss_and_grad(p, obs, u, logp - np.log(1.5), np.ones(1), ret, cfg)
    assert st["ratio"][0] == pytest.approx(1.5)
    assert st["actor_loss"] == pytest.approx(-1.2)
    # with the clipped branch active only the entropy bonus moves log_std
    np.testing.assert_allclose(p.view("log_std", grad), -cfg.entropy_coeff)
