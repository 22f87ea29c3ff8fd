"""Actor-critic MLP with history/preview encoders and hand-written backprop.

Parameters live in one flat float64 vector; a manifest maps layer names to
``(offset, shape)`` so every layer is a view into that vector.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..mathcore import RngStream
from ..sensing import ACTION_DIM, HIST_ENTRY_DIM, PRESENT_DIM, PREVIEW_ENTRY_DIM

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class NetworkSpec:
    H: int = 5
    F: int = 5
    hist_embed: int = 64
    prev_embed: int = 32
    hidden: tuple = (256, 256)
    log_std_init: float = float(np.log(0.3))
    present_dim: int = PRESENT_DIM
    action_dim: int = ACTION_DIM

    @property
    def hist_dim(self) -> int:
        return self.H * HIST_ENTRY_DIM

    @property
    def prev_dim(self) -> int:
        return self.F * PREVIEW_ENTRY_DIM

    @property
    def obs_dim(self) -> int:
        return self.present_dim + self.hist_dim + self.prev_dim

    @property
    def trunk_in(self) -> int:
        return (self.present_dim + (self.hist_embed if self.H else 0)
                + (self.prev_embed if self.F else 0))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> NetworkSpec:
        d = dict(d)
        d["hidden"] = tuple(d["hidden"])
        return cls(**d)


def _layer_shapes(spec: NetworkSpec) -> list[tuple[str, tuple]]:
    shapes = []
    if spec.H:
        shapes += [("enc_hist.W", (spec.hist_dim, spec.hist_embed)), ("enc_hist.b", (spec.hist_embed,))]
    if spec.F:
        shapes += [("enc_prev.W", (spec.prev_dim, spec.prev_embed)), ("enc_prev.b", (spec.prev_embed,))]
    for head, out in (("pi", spec.action_dim), ("v", 1)):
        sizes = (spec.trunk_in,) + tuple(spec.hidden) + (out,)
        for k in range(len(sizes) - 1):
            shapes += [(f"{head}.W{k}", (sizes[k], sizes[k + 1])), (f"{head}.b{k}", (sizes[k + 1],))]
    shapes.append(("log_std", (spec.action_dim,)))
    return shapes


OBS_CLIP = 10.0


class PolicyParams:
    """Flat parameter vector plus its layout manifest.

    ``obs_mean``/``obs_std`` are fixed normalization buffers, not trainable
    parameters; they are serialized alongside the weights.
    """

    def __init__(self, spec: NetworkSpec, flat: np.ndarray | None = None,
                 obs_mean: np.ndarray | None = None, obs_std: np.ndarray | None = None):
        self.spec = spec
        self.obs_mean = np.zeros(spec.obs_dim) if obs_mean is None else np.asarray(obs_mean, dtype=np.float64)
        self.obs_std = np.ones(spec.obs_dim) if obs_std is None else np.asarray(obs_std, dtype=np.float64)
        self.manifest: dict[str, tuple[int, tuple]] = {}
        off = 0
        for name, shape in _layer_shapes(spec):
            self.manifest[name] = (off, shape)
            off += int(np.prod(shape))
        self.size = off
        if flat is None:
            flat = np.zeros(off)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (off,):
            raise ValueError(f"parameter vector has length {flat.size}, manifest needs {off}")
        self.flat = flat

    def view(self, name: str, flat: np.ndarray | None = None) -> np.ndarray:
        off, shape = self.manifest[name]
        buf = self.flat if flat is None else flat
        return buf[off: off + int(np.prod(shape))].reshape(shape)

    def copy(self) -> PolicyParams:
        return PolicyParams(self.spec, self.flat.copy(), self.obs_mean.copy(), self.obs_std.copy())

    def with_flat(self, flat: np.ndarray) -> PolicyParams:
        return PolicyParams(self.spec, flat, self.obs_mean, self.obs_std)

    def normalize(self, obs: np.ndarray) -> np.ndarray:
        return np.clip((obs - self.obs_mean) / self.obs_std, -OBS_CLIP, OBS_CLIP)

    @property
    def n_hidden(self) -> int:
        return len(self.spec.hidden)


def init_params(spec: NetworkSpec, rng: RngStream) -> PolicyParams:
    """Scaled Gaussian init; small actor output layer so early actions sit near zero."""
    p = PolicyParams(spec)
    n_last = len(spec.hidden)
    for name, (off, shape) in p.manifest.items():
        if name == "log_std":
            p.view(name)[:] = spec.log_std_init
        elif name.split(".")[1].startswith("W"):
            gain = 1.0
            if name == f"pi.W{n_last}":
                gain = 0.01
            p.view(name)[:] = rng.normal(0.0, gain / np.sqrt(shape[0]), size=shape)
    return p


def sigmoid(x):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def silu(x):
    return x * sigmoid(x)


def silu_grad_from(x, s):
    """SiLU derivative given the pre-activation and its sigmoid."""
    return s * (1.0 + x * (1.0 - s))


@dataclass
class ForwardCache:
    obs: np.ndarray
    z: dict
    s: dict
    a: dict
    trunk_in: np.ndarray
    mu: np.ndarray
    value: np.ndarray


def _split_obs(spec: NetworkSpec, obs: np.ndarray):
    if obs.shape[-1] != spec.obs_dim:
        raise ValueError(f"observation length {obs.shape[-1]} != network input {spec.obs_dim}")
    a = spec.present_dim
    b = a + spec.hist_dim
    return obs[:, :a], obs[:, a:b], obs[:, b:]


def forward(params: PolicyParams, obs: np.ndarray, dtype=np.float64) -> ForwardCache:
    """Batched forward pass. ``obs`` is ``(B, obs_dim)``.

    ``dtype`` selects the arithmetic precision; outputs come back as float64.
    """
    spec = params.spec
    obs = params.normalize(np.atleast_2d(np.asarray(obs, dtype=np.float64))).astype(dtype, copy=False)
    present, hist, prev = _split_obs(spec, obs)
    W = lambda name: params.view(name).astype(dtype, copy=False)  # noqa: E731
    z, sig, act = {}, {}, {}

    def layer(key, x, wname, bname):
        z[key] = x @ W(wname) + W(bname)
        sig[key] = sigmoid(z[key])
        act[key] = z[key] * sig[key]
        return act[key]

    parts = [present]
    for key, x in (("enc_hist", hist), ("enc_prev", prev)):
        if f"{key}.W" in params.manifest:
            parts.append(layer(key, x, f"{key}.W", f"{key}.b"))
    x0 = np.concatenate(parts, axis=1)
    outs = {}
    for head in ("pi", "v"):
        h = x0
        for k in range(params.n_hidden):
            h = layer(f"{head}{k}", h, f"{head}.W{k}", f"{head}.b{k}")
        k = params.n_hidden
        outs[head] = (h @ W(f"{head}.W{k}") + W(f"{head}.b{k}")).astype(np.float64)
    return ForwardCache(obs=obs, z=z, s=sig, a=act, trunk_in=x0, mu=outs["pi"], value=outs["v"][:, 0])


def network_forward(params: PolicyParams, obs: np.ndarray):
    """(squashed action mean, log-std, value) for a batch of observations."""
    c = forward(params, obs)
    return np.tanh(c.mu), params.view("log_std").copy(), c.value


def backward(params: PolicyParams, cache: ForwardCache, d_mu: np.ndarray, d_value: np.ndarray,
             d_log_std: np.ndarray) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. the flat parameters.

    ``d_mu`` is ``(B, action_dim)`` (pre-squash mean), ``d_value`` is ``(B,)``.
    """
    spec = params.spec
    dtype = cache.trunk_in.dtype
    grad = np.zeros_like(params.flat)
    g = lambda name: params.view(name, grad)  # noqa: E731
    W = lambda name: params.view(name).astype(dtype, copy=False)  # noqa: E731
    d_mu = d_mu.astype(dtype, copy=False)
    d_value = d_value.astype(dtype, copy=False)
    d_x0 = np.zeros_like(cache.trunk_in)
    n = params.n_hidden
    for head, d_out in (("pi", d_mu), ("v", d_value[:, None])):
        h_prev = cache.a[f"{head}{n - 1}"] if n else cache.trunk_in
        g(f"{head}.W{n}")[:] = h_prev.T @ d_out
        g(f"{head}.b{n}")[:] = d_out.sum(axis=0)
        d_h = d_out @ W(f"{head}.W{n}").T
        for k in range(n - 1, -1, -1):
            d_z = d_h * silu_grad_from(cache.z[f"{head}{k}"], cache.s[f"{head}{k}"])
            h_in = cache.a[f"{head}{k - 1}"] if k else cache.trunk_in
            g(f"{head}.W{k}")[:] = h_in.T @ d_z
            g(f"{head}.b{k}")[:] = d_z.sum(axis=0)
            d_h = d_z @ W(f"{head}.W{k}").T
        d_x0 += d_h
    _, hist, prev = _split_obs(spec, cache.obs)
    col = spec.present_dim
    for key, x, width in (("enc_hist", hist, spec.hist_embed), ("enc_prev", prev, spec.prev_embed)):
        if f"{key}.W" not in params.manifest:
            continue
        d_a = d_x0[:, col: col + width]
        col += width
        d_z = d_a * silu_grad_from(cache.z[key], cache.s[key])
        g(f"{key}.W")[:] = x.T @ d_z
        g(f"{key}.b")[:] = d_z.sum(axis=0)
    g("log_std")[:] = d_log_std
    return grad


# -- squashed diagonal Gaussian ---------------------------------------------


def log_one_minus_tanh2(u):
    """Stable ``log(1 - tanh(u)^2)``."""
    return 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


def gaussian_logp(u, mu, log_std):
    """Log-density of the pre-squash sample (summed over action dims)."""
    std = np.exp(log_std)
    return np.sum(-0.5 * ((u - mu) / std) ** 2 - log_std - 0.5 * LOG_2PI, axis=-1)


def squashed_logp(u, mu, log_std):
    """Log-density of ``tanh(u)`` including the change-of-variable term."""
    return gaussian_logp(u, mu, log_std) - np.sum(log_one_minus_tanh2(u), axis=-1)


def gaussian_entropy(log_std):
    return float(np.sum(log_std + 0.5 * (LOG_2PI + 1.0)))


def policy_act(params: PolicyParams, obs: np.ndarray, rng: RngStream | None = None,
               deterministic: bool = False, dtype=np.float64):
    """Sample (or take the mean) action for a batch.

    Returns ``(action, pre_squash, log_prob, value)``; ``log_prob`` is ``None``
    in deterministic mode.
    """
    c = forward(params, obs, dtype)
    log_std = params.view("log_std")
    if deterministic:
        return np.tanh(c.mu), c.mu, None, c.value
    u = c.mu + np.exp(log_std) * rng.normal(size=c.mu.shape)
    a = np.clip(np.tanh(u), -1.0, 1.0)
    return a, u, squashed_logp(u, c.mu, log_std), c.value
