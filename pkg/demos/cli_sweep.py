"""Drive the command line from Python: one sweep written as CSV, then checked for repeatability."""

import subprocess
import sys
import tempfile
from pathlib import Path

cmd = [sys.executable, "-m", "qkdbounds"]
with tempfile.TemporaryDirectory() as d:
    out = Path(d) / "sarg.csv"
    args = ["curve", "--protocol", "sarg", "--from", "0", "--to", "30", "--step", "10", "--out", str(out)]
    subprocess.run(cmd + args, check=True)
    first = out.read_bytes()
    subprocess.run(cmd + args, check=True)
    print(out.read_text())
    print("identical on rerun:", first == out.read_bytes())

res = subprocess.run(cmd + ["rate", "single", "--protocol", "sarg", "--qber", "0.2"], capture_output=True, text=True)
print("SARG at QBER 0.2 gives exit code", res.returncode, "(2 means no positive key)")
