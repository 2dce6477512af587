#!/usr/bin/env python3
"""Full desk-scale study: RL sweep, NSGA-II baseline, and front comparison.

Runs the eight-point scan-weight sweep from configs/desk.yaml, evolves the
NSGA-II schedule baseline on the same scenario, and compares the resulting
fronts. Expect roughly an hour at one worker; pass --workers to parallelise
the sweep.
"""

import argparse
import sys
from pathlib import Path

from radarlab.cli import main as radarlab

ROOT = Path(__file__).resolve().parent.parent
CONFIG = str(ROOT / "configs" / "desk.yaml")


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/desk", help="output root directory")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    out = Path(args.out)
    common = ["--config", CONFIG, "--seed", str(args.seed)]
    steps = [
        ["sweep", *common, "--out", str(out / "sweep"), "--workers", str(args.workers)],
        ["nsga", *common, "--out", str(out / "nsga")],
        [
            "compare",
            *common,
            "--out",
            str(out / "compare"),
            str(out / "sweep" / "front.csv"),
            str(out / "nsga" / "front.csv"),
        ],
    ]
    for argv in steps:
        code = radarlab(argv)
        if code != 0:
            return code
    print(f"desk study complete -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
