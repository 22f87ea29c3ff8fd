"""Release the payload inside the cable length and report the slack/taut phases.

Usage: python scripts/slack_taut_drop.py [--gap 0.3] --out runs/drop
"""
from __future__ import annotations

import argparse

from cablequad.evaluation import ScenarioConfig, drop_phases, run_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gap", type=float, default=0.3, help="initial shortfall below the cable length, m")
    ap.add_argument("--m-P", dest="m_P", type=float, default=0.2)
    ap.add_argument("--l", type=float, default=1.0)
    ap.add_argument("--duration", type=float, default=4.0)
    ap.add_argument("--out", default="runs/drop")
    args = ap.parse_args()
    cfg = ScenarioConfig(m_P=args.m_P, l=args.l, drop_gap=args.gap, drop_duration=args.duration)
    res = run_scenario("slack_taut_drop", cfg)
    res.write(args.out)
    ph = drop_phases(res.events)
    for t, kind in res.events:
        print(f"{t:7.3f} s  {kind}")
    print(f"free fall ends at {ph['free_fall_end']:.3f} s, {ph['bounces']} bounce(s), "
          f"{'taut' if ph['settled_taut'] else 'slack'} at the end")


if __name__ == "__main__":
    main()
