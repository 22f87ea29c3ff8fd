"""Command-line entry point: simulate, train, eval, sweep and gen-ref.

Exit codes: 0 success, 1 usage or configuration error, 2 simulation diverged.
"""
from __future__ import annotations

import os

# pin BLAS to one thread before numpy loads so outputs are bit-reproducible
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import sys  # noqa: E402
from dataclasses import replace  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from .config import ConfigError, RunConfig, load_config  # noqa: E402
from .dynamics import SimulationDiverged, write_csv  # noqa: E402
from .env import VecEnv  # noqa: E402
from .evaluation.scenarios import SCENARIOS, run_episode, run_scenario  # noqa: E402
from .learning import checkpoint  # noqa: E402
from .learning.ppo import train_loop, write_outputs  # noqa: E402
from .mathcore import RngStream  # noqa: E402
from .reference import REFERENCE_COLUMNS, reference_table, sample_reference  # noqa: E402

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; we reserve 2 for divergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _policy(path):
    if path is None or path == "baseline":
        return None
    try:
        params, _ = checkpoint.load(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load policy {path}: {exc}") from None
    return params


def _config(args) -> RunConfig:
    return load_config(args.config) if getattr(args, "config", None) else load_config()


def _match_obs(cfg: RunConfig, policy):
    """Observation window follows the policy's architecture."""
    if policy is None:
        return cfg.env
    return replace(cfg.env, obs=replace(cfg.env.obs, H=policy.spec.H, F=policy.spec.F))


def cmd_simulate(args) -> int:
    cfg = _config(args)
    policy = _policy(args.policy)
    env_cfg = replace(_match_obs(cfg, policy), num_envs=args.envs)
    if args.duration is not None:
        env_cfg = replace(env_cfg, episode_time=args.duration)
    res = run_episode(env_cfg, args.seed, policy, cfg.scenario.gains, "simulate",
                      settle=(cfg.scenario.settle_eps, cfg.scenario.settle_tau))
    res.write(args.out)
    env = VecEnv(env_cfg, seed=args.seed)
    env.reset()
    for i in range(env_cfg.num_envs):
        spec = env._specs[i]
        table = reference_table(spec, float(env._params[i].m_P), float(env.l_eff[i]))
        write_csv(Path(args.out) / f"simulate_reference_{i}.csv", REFERENCE_COLUMNS, table.tolist())
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    iters = args.iterations if args.iterations is not None else cfg.train.iterations
    ppo = replace(cfg.ppo, num_envs=cfg.env.num_envs)
    result = train_loop(lambda s: VecEnv(cfg.env, seed=s), ppo, iters, args.seed, net_spec=cfg.network,
                        checkpoint_every=cfg.train.checkpoint_every, verbose=args.verbose)
    write_outputs(result, args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    policy = _policy(args.policy)
    scfg = replace(cfg.scenario, seeds=args.seeds)
    res = run_scenario(args.scenario, scfg, args.seed, policy)
    res.write(args.out)
    return EXIT_OK


def parse_grid(spec: str) -> dict:
    """``m_P=0:0.2:5,l=0:1:5,seeds=3`` (``lo:hi:count`` ranges or ``a;b;c`` lists)."""
    out = {}
    for part in filter(None, (p.strip() for p in spec.split(","))):
        if "=" not in part:
            raise ConfigError(f"grid entry {part!r} is not key=value")
        key, val = (s.strip() for s in part.split("=", 1))
        try:
            if key == "seeds":
                out["seeds"] = int(val)
                continue
            if key not in ("m_P", "l"):
                raise ConfigError(f"unknown grid key {key!r}")
            if ":" in val:
                lo, hi, n = val.split(":")
                vals = np.linspace(float(lo), float(hi), int(n))
            else:
                vals = np.array([float(v) for v in val.split(";")])
        except ValueError as exc:
            raise ConfigError(f"bad grid entry {part!r}: {exc}") from None
        if vals.size == 0 or np.any(vals < 0):
            raise ConfigError(f"grid axis {key} must be non-empty and non-negative")
        out["grid_m_P" if key == "m_P" else "grid_l"] = tuple(float(v) for v in vals)
    return out


def cmd_sweep(args) -> int:
    cfg = _config(args)
    policy = _policy(args.policy)
    scfg = replace(cfg.scenario, **parse_grid(args.grid))
    if args.duration is not None:
        scfg = replace(scfg, duration=args.duration)
    res = run_scenario("grid_sweep", scfg, args.seed, policy)
    res.write(args.out)
    return EXIT_OK


def cmd_gen_ref(args) -> int:
    cfg = _config(args)
    spec = sample_reference(RngStream(args.seed), args.duration, cfg.env.origin, amp_scale=cfg.env.amp_scale)
    nom = cfg.env.nominal
    table = reference_table(spec, float(nom.m_P), float(nom.l), rate=args.rate)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    write_csv(out, REFERENCE_COLUMNS, table.tolist())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cablequad", description="Quadrotor with cable-suspended payload: "
                "simulation, training and evaluation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        sp.add_argument("--seed", type=int, default=0, help="root random seed")
        if config:
            sp.add_argument("--config", help="INI configuration file")

    s = sub.add_parser("simulate", help="run closed-loop episodes and log trajectories")
    common(s)
    s.add_argument("--policy", help="checkpoint file; omit or 'baseline' for the geometric controller")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--envs", type=int, default=1, help="number of parallel episodes")
    s.add_argument("--duration", type=float, help="episode length in seconds")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("train", help="train a policy with PPO")
    common(s)
    s.add_argument("--out", required=True, help="output directory for checkpoints and the log")
    s.add_argument("--iterations", type=int, help="override [train] iterations")
    s.add_argument("--verbose", action="store_true", help="print per-iteration progress")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="run an evaluation scenario")
    common(s)
    s.add_argument("--scenario", required=True, choices=SCENARIOS)
    s.add_argument("--policy", help="checkpoint file; omit or 'baseline' for the geometric controller")
    s.add_argument("--seeds", type=int, default=1, help="episodes per scenario cell")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="payload mass x cable length grid")
    common(s)
    s.add_argument("--grid", default="m_P=0:0.2:5,l=0:1:5,seeds=3",
                   help="grid spec, e.g. 'm_P=0:0.2:5,l=0:1:5,seeds=3'")
    s.add_argument("--policy", help="checkpoint file; omit or 'baseline' for the geometric controller")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--duration", type=float, help="episode length in seconds")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("gen-ref", help="sample a reference and write it as CSV")
    common(s)
    s.add_argument("--out", required=True, help="output CSV file")
    s.add_argument("--duration", type=float, default=25.0, help="reference horizon in seconds")
    s.add_argument("--rate", type=float, default=100.0, help="sample rate in Hz")
    s.set_defaults(func=cmd_gen_ref)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDiverged as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        # invalid combinations of otherwise well-formed inputs
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


cli_main = main


if __name__ == "__main__":
    sys.exit(main())
