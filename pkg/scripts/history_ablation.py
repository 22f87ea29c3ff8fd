"""Evaluate one policy with its I/O history truncated to each length in --histories.

Usage: python scripts/history_ablation.py --policy ckpt.bin [--histories 0 1 5] --out runs/ablation
"""
from __future__ import annotations

import argparse
from collections import defaultdict

import numpy as np

from cablequad.evaluation import ScenarioConfig, run_scenario
from cablequad.evaluation.scenarios import RESULT_COLUMNS
from cablequad.learning import checkpoint


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--policy", required=True)
    ap.add_argument("--histories", type=int, nargs="+", default=[0, 1, 5, 10])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/ablation")
    args = ap.parse_args()
    policy, _ = checkpoint.load(args.policy)
    cfg = ScenarioConfig(histories=tuple(args.histories), seeds=args.seeds)
    res = run_scenario("history_ablation", cfg, args.seed, policy)
    res.write(args.out)
    i_h, i_r = RESULT_COLUMNS.index("H"), RESULT_COLUMNS.index("rmse_total")
    by_h = defaultdict(list)
    for row in res.rows:
        by_h[row[i_h]].append(row[i_r])
    for h in args.histories:
        used = min(h, policy.spec.H)
        print(f"H={h:2d} (active {used:2d}): mean rmse_total {np.nanmean(by_h[h]):.4f} m")


if __name__ == "__main__":
    main()
