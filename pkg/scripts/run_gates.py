"""Per-line success of all 16 two-input gates under both encoding schemes."""

import csv
import sys

from potp.cli import main

out = sys.argv[1] if len(sys.argv) > 1 else "out/gates"
code = main(["gates", "--trials", "20000", "--seed", "1", "--out", out])
with open(f"{out}/gates.csv") as fh:
    rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
print(f"{len(rows) - 1} cells written to {out}/gates.csv")
sys.exit(code)
