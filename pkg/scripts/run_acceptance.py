"""Run the acceptance criteria and print only the PASS/FAIL lines."""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

proc = subprocess.run(
    [sys.executable, "-m", "pytest", str(ROOT / "tests" / "test_acceptance.py"), "-q", "-p", "no:cacheprovider"],
    capture_output=True, text=True, cwd=ROOT,
)
lines = [l for l in proc.stdout.splitlines() if l.startswith("criterion ")]
print("\n".join(lines) if lines else proc.stdout)
sys.exit(proc.returncode)
