"""Oracle-equivalence self tests behind ``cfxbo validate``.

Each check returns a :class:`CheckResult` with the worst error seen and the
tolerance it was held to. The random instances are drawn from a fixed seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .acquisition import AcquisitionInputs, ei_cfx_grad, ei_cfx_grad_fd, ei_cfx_moments, ei_cfx_piecewise
from .potential import INV_E, PotentialKind, PotentialSpec
from .quadrature import gauss_hermite, gauss_legendre, integrate
from .surrogate import KernelParams, SampleSet, fit

__all__ = [
    "CheckResult",
    "random_ei_tuples",
    "check_ei_closed_form",
    "check_ei_gradient",
    "check_quadrature_exactness",
    "check_quadrature_nodes",
    "run_all",
    "format_table",
]

EI_REL_TOL = 1e-8
EI_ABS_TOL = 1e-12
GRAD_REL_TOL = 1e-5
GRAD_ABS_TOL = 1e-12
FD_STEP = 1e-5
MOMENT_REL_TOL = 1e-10
MASS_TOL = 1e-12
NODE_TOL = 1e-12


@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float
    passed: bool
    detail: str = ""


def random_ei_tuples(n: int, rng: np.random.Generator):
    """``n`` tuples ``(mean, std, PotentialSpec, incumbent)``.

    ``std`` is log-uniform on [1e-6, 10]; a tenth of the incumbents are 0 and
    the rest log-uniform on [1e-6, 1/e]; kinds cycle through AEP+, AEP-, SEP.
    """
    kinds = list(PotentialKind)
    out = []
    for i in range(n):
        center = rng.normal(scale=2.0)
        width = 10.0 ** rng.uniform(-1.0, 1.0)
        std = 10.0 ** rng.uniform(-6.0, 1.0)
        # keep the mean within a few widths of a target so most values are non-trivial
        mean = center + width * rng.uniform(-3.0, 3.0)
        if i % 10 == 0:
            inc = 0.0
        else:
            inc = math.exp(rng.uniform(math.log(1e-6), math.log(INV_E)))
        out.append((mean, std, PotentialSpec(kinds[i % 3], center, width), inc))
    return out


def check_ei_closed_form(n: int = 500, seed: int = 0) -> CheckResult:
    """Closed-form EI-CFX against piecewise Gauss-Legendre integration."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    ok = True
    t0 = time.perf_counter()
    for mean, std, pot, inc in random_ei_tuples(n, rng):
        cf = float(ei_cfx_moments(mean, std, pot, inc))
        ref = ei_cfx_piecewise(mean, std, pot, inc)
        err = abs(cf - ref)
        worst = max(worst, err / max(abs(ref), EI_ABS_TOL / EI_REL_TOL))
        ok &= err <= max(EI_REL_TOL * abs(ref), EI_ABS_TOL)
    dt = time.perf_counter() - t0
    return CheckResult("ei_cfx closed form vs quadrature", worst, EI_REL_TOL, bool(ok),
                       f"{n} tuples, {dt:.2f}s")


def random_gradient_instance(rng: np.random.Generator, kind: PotentialKind):
    """Small 2-D GP posterior, a potential and a query point."""
    X = rng.uniform(size=(6, 2))
    y = np.sin(3.0 * X[:, 0]) + np.cos(2.0 * X[:, 1]) + 0.3 * rng.normal(size=6)
    post = fit(SampleSet(X, y), KernelParams(rng.uniform(0.2, 0.6, 2), 1.0), standardize=True)
    pot = PotentialSpec(kind, float(rng.normal()), float(rng.uniform(0.2, 2.0)))
    return AcquisitionInputs(post, pot), rng.uniform(size=2)


def check_ei_gradient(n: int = 200, seed: int = 1) -> CheckResult:
    """Analytic gradient against central differences with ``h = 1e-5``."""
    rng = np.random.default_rng(seed)
    kinds = list(PotentialKind)
    worst = 0.0
    ok = True
    for i in range(n):
        inputs, x = random_gradient_instance(rng, kinds[i % 3])
        g = ei_cfx_grad(inputs, x)
        fd = ei_cfx_grad_fd(inputs, x, h=FD_STEP)
        scale = float(np.max(np.abs(g)))
        err = float(np.max(np.abs(g - fd)))
        worst = max(worst, err / max(scale, GRAD_ABS_TOL / GRAD_REL_TOL))
        ok &= err <= max(GRAD_REL_TOL * scale, GRAD_ABS_TOL)
    return CheckResult("ei_cfx gradient vs central differences", worst, GRAD_REL_TOL, bool(ok), f"{n} instances")


def hermite_moment(k: int) -> float:
    """``int x^k exp(-x^2/2) dx``."""
    if k % 2:
        return 0.0
    return math.sqrt(2.0 * math.pi) * math.prod(range(k - 1, 0, -2))


def legendre_moment(k: int) -> float:
    """``int_{-1}^{1} x^k dx``."""
    return 0.0 if k % 2 else 2.0 / (k + 1)


def check_quadrature_exactness(n_max: int = 10) -> CheckResult:
    worst = 0.0
    ok = True
    for make, moment, mass in ((gauss_hermite, hermite_moment, math.sqrt(2.0 * math.pi)),
                               (gauss_legendre, legendre_moment, 2.0)):
        for n in range(1, n_max + 1):
            rule = make(n)
            ok &= bool(np.all(rule.weights > 0.0))
            ok &= abs(rule.mass - mass) <= MASS_TOL and abs(np.sum(rule.weights) - mass) <= MASS_TOL * mass
            for k in range(2 * n):
                exact = moment(k)
                got = integrate(rule, lambda x, k=k: x ** k)
                # odd moments vanish: measure them against the even moment of the same order scale
                scale = abs(exact) if exact else abs(moment(k + 1))
                err = abs(got - exact) / scale
                worst = max(worst, err)
                ok &= err <= MOMENT_REL_TOL
    return CheckResult("quadrature exactness up to degree 2n-1", worst, MOMENT_REL_TOL, bool(ok), f"n = 1..{n_max}")


def check_quadrature_nodes() -> CheckResult:
    leg = gauss_legendre(2).nodes
    her = gauss_hermite(3).nodes
    errs = [abs(leg[0] + 1 / math.sqrt(3)), abs(leg[1] - 1 / math.sqrt(3)),
            abs(her[0] + math.sqrt(3)), abs(her[1]), abs(her[2] - math.sqrt(3))]
    worst = max(errs)
    return CheckResult("closed-form nodes", worst, NODE_TOL, worst <= NODE_TOL, "Legendre n=2, Hermite n=3")


def run_all() -> list[CheckResult]:
    return [check_ei_closed_form(), check_ei_gradient(), check_quadrature_exactness(), check_quadrature_nodes()]


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'max error':>10}  {'tol':>8}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.max_error:10.3e}  {r.tolerance:8.1e}  "
                     f"{'PASS' if r.passed else 'FAIL'}  {r.detail}")
    return "\n".join(lines)
