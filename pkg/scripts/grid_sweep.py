"""Payload mass x cable length sweep with a per-cell summary table.

Usage: python scripts/grid_sweep.py [--policy ckpt.bin] [--seeds 3] --out runs/grid
"""
from __future__ import annotations

import argparse
from collections import defaultdict
from dataclasses import replace

import numpy as np

from cablequad.evaluation import ScenarioConfig, run_scenario
from cablequad.evaluation.scenarios import RESULT_COLUMNS
from cablequad.learning import checkpoint


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--policy", help="checkpoint; geometric baseline if omitted")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--duration", type=float, default=20.0)
    ap.add_argument("--out", default="runs/grid")
    args = ap.parse_args()
    policy = checkpoint.load(args.policy)[0] if args.policy else None
    cfg = replace(ScenarioConfig(), seeds=args.seeds, duration=args.duration)
    res = run_scenario("grid_sweep", cfg, args.seed, policy)
    res.write(args.out)
    i_m, i_l, i_r = (RESULT_COLUMNS.index(k) for k in ("m_P", "l", "rmse_total"))
    cells = defaultdict(list)
    for row in res.rows:
        cells[(row[i_m], row[i_l])].append(row[i_r])
    print("mean rmse_total [m]; rows m_P, columns l")
    print("m_P \\ l " + " ".join(f"{l:7.2f}" for l in cfg.grid_l))
    for m in cfg.grid_m_P:
        print(f"{m:7.2f} " + " ".join(f"{np.nanmean(cells[(m, l)]):7.3f}" for l in cfg.grid_l))


if __name__ == "__main__":
    main()
