"""Timing comparison of the compiled and pure-python kernel backends.

Runs the same workloads in two subprocesses, one with the default
(compiled) backend and one with CG_BACKEND=numpy, and prints the
wall-clock times and speedup.  Both backends follow the same sample
path (chain kernels bit-identical, molecular kernels up to the ulp
rounding of transcendental functions); the match column compares a
12-digit checksum.

Usage: python benchmarks/bench_backends.py [--steps N]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys

WORKLOAD = '''
import time
import numpy as np
from cgchain import backend
from cgchain.potentials import make_system, make_reaction_coordinate, PairPotential
from cgchain.sde import TrajectoryConfig, simulate_overdamped
from cgchain.chain_nn import ChainModelNN, reference_force_mc_nn

steps = {steps}

results = []

s = make_system("butane")
cfg = TrajectoryConfig(dt=1e-3, steps=steps // 10, seed=1, burn_in=1000,
                       thinning=10)
t0 = time.perf_counter()
traj = simulate_overdamped(s, 1.0, cfg)
results.append(("butane trajectory (%d steps)" % steps,
                time.perf_counter() - t0, float(traj.sum())))

m = ChainModelNN(PairPotential.quartic_w1(), 1.0)
t0 = time.perf_counter()
est, hw = reference_force_mc_nn(m, 1.4, 50, steps=steps, seed=2)
results.append(("NN chain N=50 (%d steps)" % steps,
                time.perf_counter() - t0, est))

print("backend=%s" % ("numba" if backend.USING_NUMBA else "numpy"))
for name, dt, check in results:
    print("%s\\t%.3f\\t%.12g" % (name, dt, check))
'''


def run(backend_env: str | None, steps: int) -> dict:
    env = dict(os.environ)
    env.pop("CG_BACKEND", None)
    if backend_env:
        env["CG_BACKEND"] = backend_env
    proc = subprocess.run([sys.executable, "-c",
                           WORKLOAD.format(steps=steps)],
                          env=env, capture_output=True, text=True,
                          check=True)
    out = {}
    for line in proc.stdout.splitlines()[1:]:
        name, t, check = line.split("\t")
        out[name] = (float(t), check)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=2_000_000)
    args = ap.parse_args()
    fast = run(None, args.steps)
    slow = run("numpy", args.steps)
    print("%-40s %10s %10s %8s  %s" % ("workload", "compiled", "python",
                                       "speedup", "match"))
    for name in fast:
        tf, cf = fast[name]
        ts, cs = slow[name]
        print("%-40s %9.2fs %9.2fs %7.1fx  %s"
              % (name, tf, ts, ts / tf, cf == cs))


if __name__ == "__main__":
    main()
