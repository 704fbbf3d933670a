"""Compiled and pure-numpy backends must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np

SCRIPT = """
import numpy as np
from cgchain import backend
from cgchain.chain_nn import ChainModelNN, reference_force_mc_nn
from cgchain.potentials import PairPotential, make_system, make_reaction_coordinate
from cgchain.sde import TrajectoryConfig, simulate_overdamped

m = ChainModelNN(PairPotential.quartic_w1(), 1.0)
est, hw = reference_force_mc_nn(m, 1.3, 5, steps=40_000, seed=3)
s = make_system("three-atom")
cfg = TrajectoryConfig(dt=1e-3, steps=500, burn_in=1_000, thinning=4, seed=9)
traj = simulate_overdamped(s, 1.0, cfg)
print(repr(backend.USING_NUMBA))
print(repr((est, hw)))
print(repr(traj.tobytes().hex()))
"""


def decode_traj(line):
    return np.frombuffer(bytes.fromhex(eval(line)))


def run_with_backend(backend_name):
    env = dict(os.environ)
    if backend_name:
        env["CG_BACKEND"] = backend_name
    else:
        env.pop("CG_BACKEND", None)
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env,
                         capture_output=True, text=True, check=True)
    return out.stdout.strip().splitlines()

def test_numpy_fallback_matches_compiled_backend():
    compiled = run_with_backend(None)
    fallback = run_with_backend("numpy")
    assert fallback[0] == "False"  # the fallback really is pure python
    # polynomial chain kernels: bit-identical
    assert compiled[1] == fallback[1]
    # molecular kernels call transcendental functions, whose last-ulp
    # rounding differs between numba's libm and numpy's
    a = decode_traj(compiled[2])
    b = decode_traj(fallback[2])
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)
