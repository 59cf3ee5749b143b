"""Time the hot kernels on the numba and pure NumPy backends.

Each backend runs in its own interpreter because the switch
(``CFXBO_DISABLE_NUMBA``) is read at import time::

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from cfxbo._accel import backend
from cfxbo.acquisition import ei_cfx_moments, ei_cfx_moment_partials
from cfxbo.potential import PotentialSpec, lambert_w
from cfxbo.quadrature import gauss_hermite
from cfxbo.surrogate import KernelParams, SampleSet, fit, predict

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
m = rng.normal(size=100_000)
s = rng.uniform(0.0, 2.0, 100_000)
pot = PotentialSpec("SEP", 0.0, 0.7)
X = rng.uniform(size=(200, 4))
post = fit(SampleSet(X, np.sin(X).sum(axis=1)), KernelParams(0.5))
Xs = rng.uniform(size=(2000, 4))
cs = -rng.uniform(0.0, 0.36, 2000)

cases = {
    "ei_value 1e5": lambda: ei_cfx_moments(m, s, pot, 0.2),
    "ei_partials 1e5": lambda: ei_cfx_moment_partials(m, s, pot, 0.2),
    "gp_predict 2000x200": lambda: predict(post, Xs),
    "lambert_w 2x2000": lambda: [lambert_w(k, c) for c in cs for k in (0, -1)],
    "gauss_hermite n=128": lambda: gauss_hermite(128),
}
out = {"backend": backend()}
for name, fn in cases.items():
    fn()  # warm-up, includes compilation
    out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("CFXBO_DISABLE_NUMBA", None)
    if disable:
        env["CFXBO_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    print(f"{'kernel':<22}{fast['backend'] + ' [ms]':>14}{slow['backend'] + ' [ms]':>14}{'speedup':>10}")
    for name in fast:
        if name == "backend":
            continue
        a, b = fast[name] * 1e3, slow[name] * 1e3
        print(f"{name:<22}{a:>14.2f}{b:>14.2f}{b / a:>10.1f}")


if __name__ == "__main__":
    main()
