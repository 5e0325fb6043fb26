#!/usr/bin/env python3
"""Evaluate every baseline on the reference scenario and export the tables.

Writes per-policy episode CSVs plus a combined summary, the inputs behind
the damage/tracking/utilization comparisons.

Usage:
    python3 scripts/run_reference_eval.py --out results/ [--episodes 100]
        [--seeds 5] [--workers 2] [--policies random,heuristic]
"""

import argparse
import json
import os
import sys

from cuas.evaluation import batch_summary, export_csv, run_batch
from cuas.policies import BASELINE_POLICIES
from cuas.scenario import default_config


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--episodes", type=int, default=100)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--policies", default=",".join(BASELINE_POLICIES))
    args = parser.parse_args()

    config = default_config()
    seeds = list(range(args.seeds))
    os.makedirs(args.out, exist_ok=True)

    combined = {}
    for name in args.policies.split(","):
        batch = run_batch(config, BASELINE_POLICIES[name], args.episodes, seeds,
                          policy_name=name, workers=args.workers)
        export_csv(batch, os.path.join(args.out, f"{name}.csv"))
        combined[name] = batch_summary(batch)["overall"]
        o = combined[name]
        print(f"{name:10s} damage {o['damage_pct']['mean']:6.2f} "
              f"tracking {o['tracking_pct']['mean']:6.2f} "
              f"utilization {o['utilization_pct']['mean']:6.2f}")

    with open(os.path.join(args.out, "summary.json"), "w") as f:
        json.dump(combined, f, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
