#!/usr/bin/env python3
"""Sweep the exemplar budget fraction for the replay strategies.

Expects a generated stream (see run_benchmark.py); writes one comparison
block per budget value plus a sweep summary.
"""

import argparse
import sys
from pathlib import Path

from driftbench.cli import main


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--manifest", default="results/stream/manifest.json")
    parser.add_argument("--values", default="0.005,0.01,0.02,0.05")
    parser.add_argument("--strategies", default="emr,repeat")
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--jobs", default="4")
    parser.add_argument("--out-dir", default="results/sweep_budget")
    args = parser.parse_args(argv)

    if not Path(args.manifest).exists():
        print(f"no manifest at {args.manifest}; run run_benchmark.py first",
              file=sys.stderr)
        return 1
    return main(["sweep", "--manifest", args.manifest,
                 "--param", "M", "--values", args.values,
                 "--strategies", args.strategies, "--seeds", args.seeds,
                 "--jobs", args.jobs, "--out-dir", args.out_dir])


if __name__ == "__main__":
    sys.exit(run())
