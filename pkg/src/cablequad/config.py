"""INI run configuration.

Each section maps onto one dataclass; values are coerced by the type of the
field's default. Unknown sections or keys raise :class:`ConfigError` so a
typo never silently falls back to a default.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .actuation import RatePidState
from .dynamics import SystemParams
from .env import EnvConfig
from .evaluation.baseline import BaselineGains
from .evaluation.scenarios import ScenarioConfig
from .learning.network import NetworkSpec
from .learning.ppo import PPOConfig
from .randomization import RandomizationRanges
from .reward import RewardConfig, TerminationConfig
from .sensing import NoiseConfig, ObservationConfig


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""


@dataclass(frozen=True)
class TrainSettings:
    iterations: int = 100
    checkpoint_every: int = 10


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    network: NetworkSpec = field(default_factory=NetworkSpec)
    train: TrainSettings = field(default_factory=TrainSettings)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)


# keys each section may set; omitted fields are internal state or derived
_ENV_KEYS = ("num_envs", "episode_time", "cable_model", "randomize", "reference", "amp_scale", "origin",
             "perturb_scale", "disturbance", "ground_effect", "active_history")
_PID_KEYS = ("K_p", "K_i", "K_d", "integral_limit", "M_max", "M_min")
_NET_KEYS = ("hist_embed", "prev_embed", "hidden", "log_std_init")
_SCENARIO_KEYS = tuple(f.name for f in fields(ScenarioConfig) if f.name not in ("gains", "nominal"))
_PPO_KEYS = tuple(f.name for f in fields(PPOConfig) if f.name != "num_envs")

SECTIONS = {
    "params": (SystemParams, None),
    "env": (EnvConfig, _ENV_KEYS),
    "randomization": (RandomizationRanges, None),
    "noise": (NoiseConfig, None),
    "observation": (ObservationConfig, None),
    "reward": (RewardConfig, None),
    "termination": (TerminationConfig, None),
    "rate_pid": (RatePidState, _PID_KEYS),
    "ppo": (PPOConfig, _PPO_KEYS),
    "network": (NetworkSpec, _NET_KEYS),
    "train": (TrainSettings, None),
    "scenario": (ScenarioConfig, _SCENARIO_KEYS),
    "baseline": (BaselineGains, None),
}


def _allowed(cls, keys):
    names = [f.name for f in fields(cls)]
    return names if keys is None else [k for k in keys if k in names]


def _default_of(cls, name):
    f = {f.name: f for f in fields(cls)}[name]
    if f.default is not dataclasses.MISSING:
        return f.default
    if f.default_factory is not dataclasses.MISSING:
        return f.default_factory()
    raise ConfigError(f"{cls.__name__}.{name} has no default")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _coerce(cls, name: str, text: str):
    default = _default_of(cls, name)
    text = text.strip()
    try:
        if cls is SystemParams and name == "J_Q":
            v = _floats(text)
            if len(v) == 3:
                return np.diag(v)
            if len(v) == 9:
                return np.array(v).reshape(3, 3)
            raise ValueError("J_Q needs 3 (diagonal) or 9 values")
        if name == "active_history":
            return None if text.lower() == "none" else int(text)
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, (int, np.integer)):
            return int(text)
        if isinstance(default, (float, np.floating)):
            return float(text)
        if isinstance(default, str):
            return text
        if isinstance(default, np.ndarray):
            v = np.array(_floats(text))
            if v.shape != default.shape:
                raise ValueError(f"expected {default.size} values")
            return v
        if isinstance(default, tuple):
            v = _floats(text)
            if name == "hidden":
                return tuple(int(x) for x in v)
            return tuple(v)
    except ValueError as exc:
        raise ConfigError(f"{cls.__name__}.{name}: {exc}") from None
    raise ConfigError(f"{cls.__name__}.{name}: unsupported field type")


def parse_sections(parser: configparser.ConfigParser) -> dict[str, dict]:
    out = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        cls, keys = SECTIONS[section]
        allowed = _allowed(cls, keys)
        vals = {}
        for key, text in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            vals[key] = _coerce(cls, key, text)
        out[section] = vals
    return out


def _build(cls, base, vals):
    try:
        return replace(base, **vals) if vals else base
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{cls.__name__}] {exc}") from None


def build_config(sections: dict[str, dict]) -> RunConfig:
    get = lambda s: sections.get(s, {})  # noqa: E731
    nominal = _build(SystemParams, SystemParams(), get("params"))
    obs = _build(ObservationConfig, ObservationConfig(), get("observation"))
    env = _build(EnvConfig, EnvConfig(
        nominal=nominal,
        ranges=_build(RandomizationRanges, RandomizationRanges(), get("randomization")),
        noise=_build(NoiseConfig, NoiseConfig(), get("noise")),
        obs=obs,
        reward=_build(RewardConfig, RewardConfig(), get("reward")),
        termination=_build(TerminationConfig, TerminationConfig(), get("termination")),
        pid=_build(RatePidState, RatePidState(), get("rate_pid")),
    ), get("env"))
    ppo = _build(PPOConfig, PPOConfig(num_envs=env.num_envs), get("ppo"))
    network = _build(NetworkSpec, NetworkSpec(H=obs.H, F=obs.F), get("network"))
    scenario = _build(ScenarioConfig, ScenarioConfig(
        nominal=nominal, gains=_build(BaselineGains, BaselineGains(), get("baseline"))), get("scenario"))
    train = _build(TrainSettings, TrainSettings(), get("train"))
    return RunConfig(env=env, ppo=ppo, network=network, train=train, scenario=scenario)


def load_config(path=None, text: str | None = None) -> RunConfig:
    """Read an INI file (or string); ``None`` for both yields the defaults."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (K_x, m_P, ...)
    try:
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file not found: {p}")
            parser.read_string(p.read_text(encoding="utf-8"), source=str(p))
        elif text is not None:
            parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if parser.defaults():
        raise ConfigError("keys outside a section are not allowed")
    return build_config(parse_sections(parser))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, np.ndarray):
        if v.shape == (3, 3) and np.allclose(v, np.diag(np.diag(v))):
            v = np.diag(v)
        return ", ".join(repr(float(x)) for x in v.reshape(-1))
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def default_ini() -> str:
    """Every configurable key with its default value."""
    lines = []
    for section, (cls, keys) in SECTIONS.items():
        lines.append(f"[{section}]")
        for name in _allowed(cls, keys):
            lines.append(f"{name} = {_fmt(_default_of(cls, name))}")
        lines.append("")
    return "\n".join(lines)
