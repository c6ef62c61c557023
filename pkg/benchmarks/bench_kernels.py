"""Compare the numba and numpy backends of the shooting kernels.

Each backend runs in a fresh interpreter because the choice is fixed at
import time by KREINSPEC_NO_NUMBA.

    python3 benchmarks/bench_kernels.py [--points 400] [--repeat 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from kreinspec import _kernels
from kreinspec.problem import shipped_problem
from kreinspec.spectral_solver import characteristic_many
n, repeat = int(sys.argv[1]), int(sys.argv[2])
P = shipped_problem("example_p0")
lams = np.linspace(-200.0, 200.0, n)
characteristic_many(P, lams[:4])  # compile / warm up
best = float("inf")
for _ in range(repeat):
    t0 = time.perf_counter()
    D = characteristic_many(P, lams)
    best = min(best, time.perf_counter() - t0)
print(json.dumps({"backend": _kernels.BACKEND, "seconds": best, "checksum": float(np.sum(np.abs(D)))}))
"""


def run_backend(disable_numba: bool, points: int, repeat: int) -> dict:
    env = dict(os.environ)
    env["KREINSPEC_THREADS"] = "1"
    if disable_numba:
        env["KREINSPEC_NO_NUMBA"] = "1"
    else:
        env.pop("KREINSPEC_NO_NUMBA", None)
    proc = subprocess.run([sys.executable, "-c", CHILD, str(points), str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run_backend(False, args.points, args.repeat)
    slow = run_backend(True, args.points, args.repeat)
    rel = abs(fast["checksum"] - slow["checksum"]) / max(1.0, abs(slow["checksum"]))
    print(f"{'backend':<8} {'seconds':>10} {'per lambda [ms]':>16}")
    for res in (fast, slow):
        print(f"{res['backend']:<8} {res['seconds']:>10.3f} {1e3 * res['seconds'] / args.points:>16.3f}")
    print(f"speedup {slow['seconds'] / fast['seconds']:.1f}x, checksum relative difference {rel:.2e}")


if __name__ == "__main__":
    main()
