"""Finite-difference check of every backward pass; exits non-zero on failure.

Usage: python scripts/gradcheck.py [--configs 50] [--seed 0]
"""

import sys

from nomachest.harness.cli import main

if __name__ == "__main__":
    sys.exit(main(["gradcheck"] + sys.argv[1:]))
