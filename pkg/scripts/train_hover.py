"""Train the scaled-down hover task on several seeds and report the pass rule.

Usage: python scripts/train_hover.py --seeds 0 1 2 --out runs/hover
"""
from __future__ import annotations

import argparse
import os
import time
from pathlib import Path

os.environ.setdefault("OMP_NUM_THREADS", "1")

from cablequad.learning.ppo import write_outputs  # noqa: E402
from cablequad.tasks import evaluate_hover, return_improvement, train_hover  # noqa: E402


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--iterations", type=int, help="override the task's iteration count")
    ap.add_argument("--out", default="runs/hover")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args()
    passed = 0
    for seed in args.seeds:
        t0 = time.perf_counter()
        res = train_hover(seed, args.iterations, args.verbose)
        write_outputs(res, Path(args.out) / f"seed{seed}")
        gain = return_improvement(res)
        chk = evaluate_hover(res.best_params)
        ok = gain >= 0.5 and chk.holds(3.0)
        passed += ok
        print(f"seed {seed}: return +{gain * 100:.0f}% (best iter {res.best_iter}), "
              f"shortest hold {chk.hold_times.min():.2f} s, {time.perf_counter() - t0:.0f} s "
              f"-> {'pass' if ok else 'fail'}", flush=True)
    print(f"{passed}/{len(args.seeds)} seeds pass")


if __name__ == "__main__":
    main()
