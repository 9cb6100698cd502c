"""Run every shipped config through the CLI and tabulate exit codes."""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
COMMAND = {"validate": "validate-law", "find": "find", "sweep": "sweep", "certify": "certify",
           "simulate": "simulate"}

for cfg in sorted((ROOT / "configs").glob("*.json")):
    cmd = COMMAND[cfg.stem.split("_")[0]]
    out = ROOT / "equilibra_out" / cfg.stem
    proc = subprocess.run([sys.executable, "-m", "equilibra.cli", cmd, "--config", str(cfg), "--out", str(out)],
                          capture_output=True, text=True)
    print(f"{cfg.stem:32s} {cmd:13s} exit {proc.returncode}")
