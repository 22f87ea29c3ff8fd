"""Rollout collection, GAE and clipped-surrogate PPO with Adam."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..mathcore import RngStream
from . import checkpoint
from .network import (
    NetworkSpec,
    PolicyParams,
    backward,
    forward,
    gaussian_entropy,
    init_params,
    policy_act,
    squashed_logp,
)

LOG_COLUMNS = ("iter", "mean_return", "mean_ep_len", "actor_loss", "value_loss", "entropy", "kl")


@dataclass(frozen=True)
class PPOConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 10
    minibatches: int = 4
    lr: float = 3e-4
    entropy_coeff: float = 1e-3
    value_coeff: float = 0.5
    grad_clip: float = 0.5
    steps_per_iter: int = 256
    num_envs: int = 16
    precision: str = "float32"
    normalize_obs: bool = True
    normalize_reward: bool = True

    def __post_init__(self):
        if not (0 < self.gamma <= 1 and 0 < self.lam <= 1):
            raise ValueError("gamma and lam must lie in (0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if self.epochs < 1 or self.minibatches < 1 or self.steps_per_iter < 1:
            raise ValueError("epochs, minibatches and steps_per_iter must be positive")
        if self.precision not in ("float32", "float64"):
            raise ValueError("precision must be float32 or float64")

    @property
    def dtype(self):
        return np.dtype(self.precision)


@dataclass
class RolloutBatch:
    """Time-major arrays ``(T, N, ...)``."""

    obs: np.ndarray
    u: np.ndarray
    logp: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    next_values: np.ndarray          # V of the successor, already 0 on termination
    episode_returns: list = field(default_factory=list)
    episode_lengths: list = field(default_factory=list)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __post_init__(self):
        T = self.rewards.shape[0]
        for name in ("obs", "u", "logp", "values", "dones", "next_values"):
            if getattr(self, name).shape[0] != T:
                raise ValueError(f"{name} is not aligned with rewards")


def gae_advantages(rewards, values, dones, next_values, gamma: float, lam: float):
    """GAE over time-major arrays.

    ``next_values[t]`` is the bootstrap value of the state after step ``t``:
    zero on termination, ``V(s_T)`` on truncation or at the rollout end.
    The recursion is cut at every done flag so episodes never mix.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    next_values = np.asarray(next_values, dtype=float)
    adv = np.zeros_like(rewards)
    last = np.zeros(rewards.shape[1:])
    for t in range(rewards.shape[0] - 1, -1, -1):
        delta = rewards[t] + gamma * next_values[t] - values[t]
        last = delta + gamma * lam * np.where(dones[t], 0.0, last)
        adv[t] = last
    return adv, adv + values


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    adv = adv - adv.mean()
    std = adv.std()
    return adv / std if std > 0 else adv


class RunningMeanStd:
    """Streaming mean/variance over the leading axes (parallel merge rule)."""

    def __init__(self, shape=(), eps: float = 1e-4):
        self.mean = np.zeros(shape)
        self.var = np.ones(shape)
        self.count = eps

    def update(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=np.float64).reshape((-1,) + self.mean.shape)
        n = x.shape[0]
        if n == 0:
            return
        b_mean, b_var = x.mean(axis=0), x.var(axis=0)
        tot = self.count + n
        delta = b_mean - self.mean
        m2 = self.var * self.count + b_var * n + delta ** 2 * self.count * n / tot
        self.mean = self.mean + delta * n / tot
        self.var = m2 / tot
        self.count = tot

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var + 1e-8)


def collect_rollout(env, params: PolicyParams, obs: np.ndarray, steps: int,
                    rng: RngStream, dtype=np.float64) -> tuple[RolloutBatch, np.ndarray]:
    """Run ``steps`` vector steps; returns the batch and the latest observation."""
    N = obs.shape[0]
    buf = {k: [] for k in ("obs", "u", "logp", "rewards", "values", "dones", "next_values")}
    ep_ret, ep_len = [], []
    for _ in range(steps):
        a, u, logp, v = policy_act(params, obs, rng, dtype=dtype)
        nxt, r, done, info = env.step(a)
        buf["obs"].append(obs)
        buf["u"].append(u)
        buf["logp"].append(logp)
        buf["rewards"].append(r)
        buf["values"].append(v)
        buf["dones"].append(done)
        boot = np.zeros(N)
        if np.any(info.truncated):
            boot[info.truncated] = forward(params, info.final_obs[info.truncated], dtype).value
        buf["next_values"].append(boot)
        ep_ret += info.episode_returns
        ep_len += info.episode_lengths
        obs = nxt
    # fill V(s_{t+1}) for non-terminal steps
    vals = np.array(buf["values"])
    last_v = forward(params, obs, dtype).value
    succ = np.concatenate([vals[1:], last_v[None]], axis=0)
    dones = np.array(buf["dones"])
    nv = np.where(dones, np.array(buf["next_values"]), succ)
    batch = RolloutBatch(
        obs=np.array(buf["obs"]), u=np.array(buf["u"]), logp=np.array(buf["logp"]),
        rewards=np.array(buf["rewards"]), values=vals, dones=dones, next_values=nv,
        episode_returns=ep_ret, episode_lengths=ep_len,
    )
    return batch, obs


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0

    def step(self, flat: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(flat)
            self.v = np.zeros_like(flat)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mh = self.m / (1 - self.beta1 ** self.t)
        vh = self.v / (1 - self.beta2 ** self.t)
        return flat - self.lr * mh / (np.sqrt(vh) + self.eps)


def ppo_loss_and_grad(params: PolicyParams, obs, u, logp_old, adv, returns, cfg: PPOConfig):
    """Clipped surrogate + value MSE - entropy bonus, with its gradient."""
    B = obs.shape[0]
    c = forward(params, obs, cfg.dtype)
    log_std = params.view("log_std")
    std = np.exp(log_std)
    logp = squashed_logp(u, c.mu, log_std)
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    surr1 = ratio * adv
    surr2 = clipped * adv
    actor_loss = -np.mean(np.minimum(surr1, surr2))
    value_err = c.value - returns
    value_loss = np.mean(value_err ** 2)
    entropy = gaussian_entropy(log_std)
    loss = actor_loss + cfg.value_coeff * value_loss - cfg.entropy_coeff * entropy
    # the unclipped branch carries the gradient wherever it attains the min
    use_unclipped = surr1 <= surr2
    d_logp = np.where(use_unclipped, -adv * ratio / B, 0.0)
    z = (u - c.mu) / std
    d_mu = d_logp[:, None] * z / std
    d_log_std = np.sum(d_logp[:, None] * (z * z - 1.0), axis=0) - cfg.entropy_coeff
    d_value = cfg.value_coeff * 2.0 * value_err / B
    grad = backward(params, c, d_mu, d_value, d_log_std)
    stats = {
        "loss": loss, "actor_loss": actor_loss, "value_loss": value_loss, "entropy": entropy,
        "kl": float(np.mean(logp_old - logp)), "clip_frac": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_eps)),
        "ratio": ratio,
    }
    return loss, grad, stats


class NonFiniteLoss(RuntimeError):
    pass


def ppo_update(params: PolicyParams, batch: RolloutBatch, cfg: PPOConfig, opt: Adam, rng: RngStream):
    """Minibatched PPO epochs; returns ``(new_params, stats)``."""
    if batch.advantages is None:
        batch.advantages, batch.returns = gae_advantages(
            batch.rewards, batch.values, batch.dones, batch.next_values, cfg.gamma, cfg.lam)
    D = batch.obs.shape[-1]
    obs = batch.obs.reshape(-1, D)
    u = batch.u.reshape(-1, batch.u.shape[-1])
    logp_old = batch.logp.reshape(-1).copy()
    adv = normalize_advantages(batch.advantages.reshape(-1))
    ret = batch.returns.reshape(-1)
    n = obs.shape[0]
    mb = max(1, n // cfg.minibatches)
    flat = params.flat.copy()
    hist = {"actor_loss": [], "value_loss": [], "entropy": [], "kl": [], "clip_frac": []}
    first_ratio = None
    log_std = params.view("log_std")
    for epoch in range(cfg.epochs):
        perm = rng.gen.permutation(n)
        chunks = [perm[k * mb: (k + 1) * mb] if k < cfg.minibatches - 1 else perm[k * mb:]
                  for k in range(cfg.minibatches)]
        if epoch == 0:
            # re-evaluate the behaviour log-probs on the exact minibatch rows so
            # reduced-precision arithmetic cannot bias the first ratios
            for idx in chunks:
                mu_old = forward(params, obs[idx], cfg.dtype).mu
                logp_old[idx] = squashed_logp(u[idx], mu_old, log_std)
        for idx in chunks:
            cur = params.with_flat(flat)
            loss, grad, st = ppo_loss_and_grad(cur, obs[idx], u[idx], logp_old[idx], adv[idx], ret[idx], cfg)
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                raise NonFiniteLoss("non-finite PPO loss; update aborted")
            if first_ratio is None:
                first_ratio = st["ratio"]
            gn = float(np.linalg.norm(grad))
            if gn > cfg.grad_clip:
                grad = grad * (cfg.grad_clip / gn)
            flat = opt.step(flat, grad)
            for key in hist:
                hist[key].append(st[key])
    stats = {k: float(np.mean(v)) for k, v in hist.items()}
    stats["first_ratio"] = first_ratio
    return params.with_flat(flat), stats


@dataclass
class TrainResult:
    log: list
    checkpoints: list            # (iteration, bytes)
    best_params: PolicyParams
    best_iter: int
    final_params: PolicyParams


def train_loop(env_factory: Callable[[int], object], cfg: PPOConfig, total_iters: int, seed: int = 0,
               net_spec: NetworkSpec | None = None, checkpoint_every: int = 10, out_dir=None,
               init: PolicyParams | None = None, verbose: bool = False) -> TrainResult:
    """collect -> GAE -> update, ``total_iters`` times.

    ``env_factory(seed)`` must return a vector environment whose ``num_envs``
    equals ``cfg.num_envs``. Checkpoints are stored in memory and, if
    ``out_dir`` is given, written as ``ckpt_XXXX.bin`` plus ``best.bin``.
    """
    root = RngStream(seed)
    r_init, r_act, r_perm = root.spawn(3)
    env = env_factory(seed)
    spec = net_spec or NetworkSpec(H=env.cfg.obs.H, F=env.cfg.obs.F)
    params = init.copy() if init is not None else init_params(spec, r_init)
    opt = Adam(cfg.lr)
    obs = env.reset()
    log, ckpts = [], [(0, checkpoint.to_bytes(params, {"iter": 0}))]
    best, best_iter, best_ret = params, 0, -np.inf
    obs_rms = RunningMeanStd((spec.obs_dim,))
    ret_rms = RunningMeanStd()
    disc_ret = np.zeros(obs.shape[0])
    for it in range(1, total_iters + 1):
        batch, obs = collect_rollout(env, params, obs, cfg.steps_per_iter, r_act, cfg.dtype)
        if cfg.normalize_reward:
            # scale rewards by the spread of the discounted return so value
            # targets stay O(1) whatever the reward magnitude
            for t in range(batch.rewards.shape[0]):
                disc_ret = disc_ret * cfg.gamma + batch.rewards[t]
                ret_rms.update(disc_ret)
                disc_ret = np.where(batch.dones[t], 0.0, disc_ret)
            batch.rewards = batch.rewards / float(ret_rms.std)
        mean_ret = float(np.mean(batch.episode_returns)) if batch.episode_returns else float("nan")
        mean_len = float(np.mean(batch.episode_lengths)) if batch.episode_lengths else float("nan")
        if batch.episode_returns and mean_ret > best_ret:
            # the rollout was generated by the pre-update parameters
            best, best_iter, best_ret = params, it, mean_ret
        if cfg.normalize_obs:
            obs_rms.update(batch.obs)
            params = PolicyParams(spec, params.flat, obs_rms.mean.copy(), obs_rms.std.copy())
        params, st = ppo_update(params, batch, cfg, opt, r_perm)
        log.append({"iter": it, "mean_return": mean_ret, "mean_ep_len": mean_len,
                    "actor_loss": st["actor_loss"], "value_loss": st["value_loss"],
                    "entropy": st["entropy"], "kl": st["kl"]})
        if verbose:
            print(f"iter {it:4d} return {mean_ret:9.2f} len {mean_len:6.1f} kl {st['kl']:.4f}", flush=True)
        if it % checkpoint_every == 0 or it == total_iters:
            ckpts.append((it, checkpoint.to_bytes(params, {"iter": it})))
    result = TrainResult(log=log, checkpoints=ckpts, best_params=best, best_iter=best_iter, final_params=params)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def write_outputs(result: TrainResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for it, data in result.checkpoints:
        (out / f"ckpt_{it:04d}.bin").write_bytes(data)
    checkpoint.save(out / "best.bin", result.best_params, {"iter": result.best_iter})
    with open(out / "train_log.csv", "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for row in result.log:
            w.writerow([row["iter"]] + [repr(float(row[k])) for k in LOG_COLUMNS[1:]])
