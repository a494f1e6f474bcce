#!/usr/bin/env python3
"""Generate the default drift stream and compare all strategies on it.

Writes the stream under RESULTS/stream and the comparison tables under
RESULTS/compare. Pass --quick for a reduced configuration that finishes in
about a minute on a laptop.
"""

import argparse
import sys
from pathlib import Path

from driftbench.cli import main
from driftbench.strategy import KINDS


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--results", default="results", help="output root")
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--strategies", default=",".join(KINDS))
    parser.add_argument("--jobs", default="4")
    parser.add_argument("--quick", action="store_true",
                        help="small stream and model, for smoke testing")
    args = parser.parse_args(argv)

    root = Path(args.results)
    stream = root / "stream"
    gen = ["generate", "--out-dir", str(stream)]
    if args.quick:
        gen += ["--partitions", "3", "--train-size", "200", "--valid-size", "40",
                "--test-size", "40", "--tokens-per-sample", "12"]
    if not (stream / "manifest.json").exists():
        code = main(gen)
        if code != 0:
            return code

    cmp_flags = ["compare", "--manifest", str(stream / "manifest.json"),
                 "--strategies", args.strategies, "--seeds", args.seeds,
                 "--jobs", args.jobs, "--out-dir", str(root / "compare")]
    if args.quick:
        cmp_flags += ["--epochs", "3", "--feature-dim", "2048", "--hidden-dim", "32"]
    code = main(cmp_flags)
    if code == 0:
        print(f"tables written under {root / 'compare'}")
    return code


if __name__ == "__main__":
    sys.exit(run())
