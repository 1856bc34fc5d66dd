"""Time the weight-solver kernels under numba and under plain numpy.

Each backend runs in its own interpreter because the backend is fixed at
import time by SABHA_PURE_NUMPY.

    python3 benchmarks/bench_kernels.py [--repeats 20]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
import sabha
from sabha import _kernels as K
from sabha.optim import Constraint, admm_solve
from sabha.simulation import make_grid_scenario
from sabha.structures import Graph

repeats = int(sys.argv[1])
rng = np.random.default_rng(0)
z = rng.standard_normal(2000)
ind = (rng.random(2000) < 0.4).astype(float)
scen = make_grid_scenario(2.5, seed=1)
h = (scen.p > 0.5).astype(float)
con = Constraint.tv_l1(Graph.grid(15), 10.0)

cases = {
    "pava n=2000": lambda: K.pava(z),
    "proj_l1 n=2000": lambda: K.proj_l1(z, 5.0),
    "proj_feasible n=2000": lambda: K.proj_feasible(np.abs(z) * 0.05, ind, 2000 * 0.5, 0.0),
    "admm tv-l1 15x15": lambda: admm_solve(h, 0.5, 0.1, con),
}
out = {"backend": sabha.backend()}
for name, fn in cases.items():
    t0 = time.perf_counter(); fn(); first = time.perf_counter() - t0
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter(); fn(); times.append(time.perf_counter() - t0)
    out[name] = {"first_s": first, "median_s": float(np.median(times))}
print(json.dumps(out))
"""


def run(pure, repeats):
    env = dict(os.environ, SABHA_PURE_NUMPY="1" if pure else "0")
    res = subprocess.run([sys.executable, "-c", CHILD, str(repeats)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()
    jit = run(False, args.repeats)
    ref = run(True, args.repeats)
    print(f"{'kernel':<24}{'numba (ms)':>12}{'numpy (ms)':>12}{'speed-up':>10}   first call numba (s)")
    for name in jit:
        if name == "backend":
            continue
        a, b = jit[name]["median_s"], ref[name]["median_s"]
        print(f"{name:<24}{a * 1e3:>12.3f}{b * 1e3:>12.3f}{b / a:>9.1f}x   {jit[name]['first_s']:.2f}")


if __name__ == "__main__":
    main()
