"""Threshold sweep, match histogram and a sign/verify round trip."""

import sys
import tempfile
from pathlib import Path

from potp.cli import main

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/signature")
main(["sig-curves", "--seed", "3", "--out", str(out)])
main(["sig-curves", "--single-row", "--seed", "3", "--out", str(out / "single_row")])
with tempfile.TemporaryDirectory() as tmp:
    msg = Path(tmp, "message.txt")
    msg.write_text("pay Bob 10 coins\n")
    main(["sign", str(msg), "--seed", "3", "--out", str(out)])
    code = main(["verify", str(msg), "--record", str(out / "record.json"),
                 "--signature", str(out / "signature.json"), "--out", str(out)])
print("signature", "accepted" if code == 0 else "rejected")
