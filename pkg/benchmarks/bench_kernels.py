"""Kernel timings with numba against the plain-Python fallback.

Each mode runs in its own interpreter because the toggle is read at import
time. Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys
import time

CHILD = r"""
import json, sys, time
import numpy as np
from harvestopt import NUMBA_ENABLED, ccd, kernels, simulate
from harvestopt.scenario import base_case, pack
from harvestopt.trajectory import Grid

repeat = int(sys.argv[1])
sc = base_case()
grid = Grid.for_scenario(sc)
params, pairs, triples = pack(sc)
companions = ccd.initial_guess(sc, grid).stocks

def best(fn):
    t0 = time.perf_counter()
    fn()
    first = time.perf_counter() - t0
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return {"first_s": first, "best_s": min(times)}

cases = {
    "build_path_x100": lambda: [
        kernels.build_path(K, 0, sc.x0[0], companions, grid.step, sc.delta, params, pairs, triples, True, 1e-10)
        for K in np.linspace(-2.0, 2.0, 100)
    ],
    "simulate_100y": lambda: simulate.integrate(sc, simulate.SimSpec(100.0)),
    "steady_state": lambda: simulate.steady_state(sc),
    "solve_base_case": lambda: ccd.solve(sc),
}
print(json.dumps({"numba": NUMBA_ENABLED, "cases": {k: best(f) for k, f in cases.items()}}))
"""


def run_mode(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env["HARVESTOPT_DISABLE_NUMBA"] = "1" if disable else "0"
    proc = subprocess.run([sys.executable, "-c", CHILD, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the raw timings here")
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    jit = run_mode(False, args.repeat)
    fallback = run_mode(True, args.repeat)
    if not jit["numba"]:
        print("numba is not installed; both columns use the fallback", file=sys.stderr)

    print(f"{'case':<18}{'numba first':>13}{'numba best':>12}{'python best':>13}{'speedup':>9}")
    for name, fast in jit["cases"].items():
        slow = fallback["cases"][name]
        print(f"{name:<18}{fast['first_s']:>12.4f}s{fast['best_s']:>11.4f}s"
              f"{slow['best_s']:>12.4f}s{slow['best_s'] / fast['best_s']:>8.1f}x")
    print(f"total wall time {time.perf_counter() - t0:.1f}s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"numba": jit, "fallback": fallback}, fh, indent=2)


if __name__ == "__main__":
    main()
