"""NMSE vs SNR for LS, MMSE, CNN and the CRB.

Usage: python scripts/run_fig3.py [--config configs/desk.cfg] [--out out/fig3] [--jobs N] [--seed S]
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
        args += ["--out", str(ROOT / "out" / "fig3")]
    return args


if __name__ == "__main__":
    sys.exit(main(["fig3"] + defaults(sys.argv[1:])))
