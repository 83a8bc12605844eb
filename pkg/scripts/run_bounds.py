"""Inequality violation, copy tradeoff, PGM certification and the two-copy circuit."""

import sys

from potp.cli import main

sys.exit(main(["bounds", "--out", sys.argv[1] if len(sys.argv) > 1 else "out/bounds"]))
