"""Comparator success for Bob's one-bit deviations, noiseless and lossy."""

import sys

from potp.cli import main

out = sys.argv[1] if len(sys.argv) > 1 else "out/millionaires"
for loss, copies in ((0.0, 1), (0.5, 8)):
    code = main(["millionaires", "--alice", "0101", "--trials", "5000", "--seed", "2",
                 "--loss", str(loss), "--copies", str(copies), "--out", f"{out}/loss{loss}"])
    if code:
        sys.exit(code)
