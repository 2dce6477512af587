#!/usr/bin/env python3
"""Roll the equal-allocation baseline through the desk scenario.

Splits the full tracking budget evenly across confirmed tracks every cycle
and leaves the remainder to the scan. The resulting objectives are the
single-point baseline the learned fronts are judged against.
"""

import argparse
import sys
from pathlib import Path

from radarlab.cli import main as radarlab

ROOT = Path(__file__).resolve().parent.parent
CONFIG = str(ROOT / "configs" / "desk.yaml")


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/desk/equal", help="output directory")
    args = parser.parse_args(argv)
    return radarlab(["simulate", "--config", CONFIG, "--out", args.out])


if __name__ == "__main__":
    sys.exit(run())
