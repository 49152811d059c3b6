"""The command-line pipeline end to end: synth -> decompose -> sweep.

Everything the optimizer consumes and produces lives in small binary matrix
files (.qlrm) plus CSV reports, so runs are scriptable and reproducible.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

tmp = Path(tempfile.mkdtemp(prefix="qlr-demo-"))
data, run_dir, sweep_dir = tmp / "data", tmp / "run", tmp / "sweep"


def qlr(*args):
    cmd = [sys.executable, "-m", "qlr", *map(str, args)]
    print(f"$ qlr {' '.join(map(str, args))}")
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.stdout:
        print(proc.stdout, end="")
    if proc.returncode != 0:
        print(proc.stderr, end="")
        raise SystemExit(proc.returncode)
    return proc


print("=== 1. synthesize a planted-outlier instance ===")
qlr("synth", "--m", 48, "--n", 32, "--d", 128, "--outliers", 3, "--gain", 10,
    "--seed", 0, "--out", data)
print("planted channels:", (data / "outliers.txt").read_text().split())

print("\n=== 2. decompose with the outlier-driven init ===")
qlr("decompose", "--weights", data / "W.qlrm", "--hessian", data / "H.qlrm",
    "--rank", 6, "--q-bits", 4, "--init", "odlri", "--iters", 10,
    "--seed", 0, "--out", run_dir)
manifest = json.loads((run_dir / "manifest.json").read_text())
print(f"resolved k (rank policy): {manifest['k']}")
report = (run_dir / "report.csv").read_text().splitlines()
print(report[0])
print(report[1])
print(report[-1])

print("\n=== 3. sweep the three initializations over 10 seeds ===")
qlr("sweep", "--inits", "zero,lrapprox,odlri", "--ranks", 6, "--seeds", "0..9",
    "--m", 48, "--n", 32, "--d", 128, "--outliers", 3, "--gain", 10,
    "--q-bits", 4, "--iters", 10, "--out", sweep_dir)

print("=== 4. a failed validation exits with code 2 ===")
proc = subprocess.run(
    [sys.executable, "-m", "qlr", "decompose", "--weights", str(data / "W.qlrm"),
     "--hessian", str(data / "H.qlrm"), "--rank", "0", "--out", str(tmp / "x")],
    capture_output=True, text=True,
)
print(f"exit code {proc.returncode}: {proc.stderr.strip()}")

print(f"\nartifacts left under {tmp}")
