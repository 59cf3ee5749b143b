import importlib.util
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from cfxbo import _kernels
from cfxbo._accel import HAS_NUMBA
from cfxbo.potential import INV_E, unit_roots


def random_batch(seed, n=2000):
    rng = np.random.default_rng(seed)
    m = rng.normal(scale=3.0, size=n)
    s = 10.0 ** rng.uniform(-6, 1, size=n)
    s[::17] = 0.0
    return m, s


@pytest.mark.parametrize("kind", [_kernels.AEP_PLUS, _kernels.AEP_MINUS, _kernels.SEP])
@pytest.mark.parametrize("rho_star", [0.0, 1e-6, 0.05, 0.3])
def test_ei_loop_matches_numpy(kind, rho_star):
    m, s = random_batch(kind)
    r0, r1 = unit_roots(rho_star) if rho_star > 0 else (0.0, np.inf)
    loop = _kernels._ei_value_loop(m, s, 0.7, rho_star, r0, r1, kind)
    vec = _kernels._ei_value_numpy(m, s, 0.7, rho_star, r0, r1, kind)
    assert np.allclose(loop, vec, rtol=1e-11, atol=1e-15)
    dl = _kernels._ei_partials_loop(m, s, 0.7, rho_star, r0, r1, kind)
    dv = _kernels._ei_partials_numpy(m, s, 0.7, rho_star, r0, r1, kind)
    for a, b in zip(dl, dv):
        assert np.allclose(a, b, rtol=1e-9, atol=1e-14)


def test_rbf_loop_matches_numpy():
    rng = np.random.default_rng(0)
    X, Y = rng.normal(size=(20, 3)), rng.normal(size=(9, 3))
    inv = 1.0 / rng.uniform(0.2, 2.0, 3)
    assert np.allclose(_kernels._rbf_cross_loop(X, Y, inv, 1.7), _kernels._rbf_cross_numpy(X, Y, inv, 1.7),
                       rtol=1e-14, atol=0)


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not active")
def test_compiled_matches_python_loops():
    m, s = random_batch(4, 200)
    r0, r1 = unit_roots(0.1)
    a = _kernels._ei_value_loop(m, s, 1.3, 0.1, r0, r1, _kernels.SEP)
    b = _kernels._ei_value_loop.py_func(m, s, 1.3, 0.1, r0, r1, _kernels.SEP)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
    for c in (-INV_E + 1e-10, -0.2, -1e-5):
        for k in (0, -1):
            assert _kernels.lambert_w_scalar(c, k) == pytest.approx(_kernels.lambert_w_scalar.py_func(c, k),
                                                                    rel=1e-13)


PROBE = """
import json, numpy as np
from cfxbo._accel import backend
from cfxbo.acquisition import ei_cfx_moments
from cfxbo.potential import PotentialSpec, lambert_w
from cfxbo.quadrature import gauss_hermite
rng = np.random.default_rng(0)
m = rng.normal(size=50); s = rng.uniform(0, 2, 50)
print(json.dumps({"backend": backend(),
                  "ei": ei_cfx_moments(m, s, PotentialSpec("SEP", 0.1, 0.8), 0.2).tolist(),
                  "w": [lambert_w(0, -0.2), lambert_w(-1, -0.2)],
                  "nodes": gauss_hermite(20).nodes.tolist()}))
"""


def run_probe(disable: bool) -> dict:
    env = dict(os.environ)
    env.pop("CFXBO_DISABLE_NUMBA", None)
    if disable:
        env["CFXBO_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_env_flag_selects_numpy_backend():
    off = run_probe(True)
    assert off["backend"] == "numpy"
    on = run_probe(False)
    assert on["backend"] == ("numba" if importlib.util.find_spec("numba") else "numpy")
    assert np.allclose(on["ei"], off["ei"], rtol=1e-11, atol=1e-15)
    assert np.allclose(on["w"], off["w"], rtol=1e-13)
    assert np.allclose(on["nodes"], off["nodes"], rtol=0, atol=1e-12)
