"""Validation RMSE per epoch across convolutional layer counts.

Usage: python scripts/run_fig5.py [--config configs/desk.cfg] [--out out/fig5] [--jobs N] [--seed S]
"""

import sys
from pathlib import Path

from nomachest.harness.cli import main

ROOT = Path(__file__).resolve().parent.parent


def defaults(argv):
    args = list(argv)
    if "--config" not in args:
        args += ["--config", str(ROOT / "configs" / "desk.cfg")]
    if "--out" not in args:
        args += ["--out", str(ROOT / "out" / "fig5")]
    return args


if __name__ == "__main__":
    sys.exit(main(["fig5"] + defaults(sys.argv[1:])))
