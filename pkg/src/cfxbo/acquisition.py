"""EI-CFX: expected improvement of an EP potential under a GP posterior over f.

With ``y ~ N(mu, sigma^2)`` the acquisition is
``E[max(0, rho(y) - rho_star)]``. The positive part of ``rho - rho_star`` is
supported on the superlevel intervals of the potential, so the max can be
replaced by finite integration limits and each one-sided piece reduces to
Gaussian integrals of a quadratic in closed form. See
:func:`cfxbo._kernels._aep_plus_value` for the algebra.

Two quadrature evaluations of the same expectation are kept here as
independent checks: :func:`ei_cfx_quadrature` (a plain Gauss-Hermite sum,
accurate only when the integrand is smooth on the scale of the rule) and
:func:`ei_cfx_piecewise` (composite Gauss-Legendre split at the kinks of the
integrand, which are located by bisection on the potential itself).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from . import _kernels
from .potential import INV_E, PotentialKind, PotentialSpec, ep_value, unit_roots
from .quadrature import QuadratureRule, gauss_legendre
from .surrogate import GpPosterior, predict

__all__ = [
    "AcquisitionInputs",
    "ei_cfx_moments",
    "ei_cfx_moment_partials",
    "ei_cfx",
    "ei_cfx_batch",
    "ei_cfx_grad",
    "ei_cfx_grad_fd",
    "ei_cfx_quadrature",
    "ei_cfx_piecewise",
    "ei_naive",
    "ei_naive_moments",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _check_incumbent(incumbent: float) -> float:
    incumbent = float(incumbent)
    if not 0.0 <= incumbent <= INV_E * (1.0 + 1e-15):
        raise ValueError(f"incumbent must lie in [0, 1/e], got {incumbent}")
    return min(incumbent, INV_E)


def ei_cfx_moments(mean, std, potential: PotentialSpec, incumbent: float):
    """Closed-form EI-CFX for Gaussian outputs ``N(mean, std^2)``.

    ``mean`` and ``std`` broadcast against each other; a scalar in gives a
    scalar out.
    """
    incumbent = _check_incumbent(incumbent)
    r0, r1 = unit_roots(incumbent) if incumbent > 0.0 else (0.0, math.inf)
    m, s = np.broadcast_arrays(np.asarray(mean, dtype=float) - potential.center,
                               np.asarray(std, dtype=float))
    shape = m.shape
    m = np.ascontiguousarray(m.reshape(-1))
    s = np.ascontiguousarray(np.maximum(s.reshape(-1), 0.0))
    out = _kernels.ei_value_batch(m, s, float(potential.width), incumbent, r0, r1,
                                  potential.kind.code).reshape(shape)
    return float(out) if out.ndim == 0 else out


def ei_cfx_moment_partials(mean, std, potential: PotentialSpec, incumbent: float):
    """Partial derivatives of :func:`ei_cfx_moments` w.r.t. ``mean`` and ``std``."""
    incumbent = _check_incumbent(incumbent)
    r0, r1 = unit_roots(incumbent) if incumbent > 0.0 else (0.0, math.inf)
    m, s = np.broadcast_arrays(np.asarray(mean, dtype=float) - potential.center,
                               np.asarray(std, dtype=float))
    shape = m.shape
    m = np.ascontiguousarray(m.reshape(-1))
    s = np.ascontiguousarray(np.maximum(s.reshape(-1), 0.0))
    dm, ds = _kernels.ei_partials_batch(m, s, float(potential.width), incumbent, r0, r1,
                                        potential.kind.code)
    dm, ds = dm.reshape(shape), ds.reshape(shape)
    if dm.ndim == 0:
        return float(dm), float(ds)
    return dm, ds


@dataclass(frozen=True)
class AcquisitionInputs:
    """Posterior over f, potential and incumbent.

    If ``incumbent`` is omitted it is recomputed from the posterior's sample
    set as the best observed potential value.
    """

    posterior: GpPosterior
    potential: PotentialSpec
    incumbent: float = field(default=None)

    def __post_init__(self):
        if self.incumbent is None:
            inc = float(np.max(ep_value(self.potential, self.posterior.data.outputs)))
        else:
            inc = self.incumbent
        object.__setattr__(self, "incumbent", _check_incumbent(inc))


def ei_cfx_batch(inputs: AcquisitionInputs, X) -> np.ndarray:
    """EI-CFX at each row of ``X``."""
    mean, var = predict(inputs.posterior, np.atleast_2d(X))
    return ei_cfx_moments(mean, np.sqrt(var), inputs.potential, inputs.incumbent)


def ei_cfx(inputs: AcquisitionInputs, x) -> float:
    mean, var = predict(inputs.posterior, np.asarray(x, dtype=float).reshape(-1))
    return float(ei_cfx_moments(mean, math.sqrt(var), inputs.potential, inputs.incumbent))


def ei_cfx_value_and_grad(inputs: AcquisitionInputs, X) -> tuple[np.ndarray, np.ndarray]:
    """Values (m,) and gradients (m, d) at the rows of ``X``."""
    mean, var, dmean, dvar = inputs.posterior.predict_with_grad(np.atleast_2d(X))
    std = np.sqrt(var)
    val = ei_cfx_moments(mean, std, inputs.potential, inputs.incumbent)
    dm, ds = ei_cfx_moment_partials(mean, std, inputs.potential, inputs.incumbent)
    val, dm, ds = np.atleast_1d(val), np.atleast_1d(dm), np.atleast_1d(ds)
    with np.errstate(divide="ignore", invalid="ignore"):
        dstd = np.where(std[:, None] > 1e-150, dvar / (2.0 * std[:, None]), 0.0)
    grad = dm[:, None] * dmean + ds[:, None] * dstd
    return val, grad


def ei_cfx_grad(inputs: AcquisitionInputs, x) -> np.ndarray:
    """Analytic gradient via the chain rule through the posterior mean and std."""
    _, grad = ei_cfx_value_and_grad(inputs, np.asarray(x, dtype=float).reshape(1, -1))
    return grad[0]


def ei_cfx_grad_fd(inputs: AcquisitionInputs, x, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient; ``h`` is relative to ``max(1, |x_j|)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.size
    steps = h * np.maximum(1.0, np.abs(x))
    pts = np.repeat(x[None, :], 2 * d, axis=0)
    for j in range(d):
        pts[2 * j, j] += steps[j]
        pts[2 * j + 1, j] -= steps[j]
    vals = ei_cfx_batch(inputs, pts)
    return (vals[0::2] - vals[1::2]) / (2.0 * steps)


def ei_cfx_quadrature(inputs: AcquisitionInputs, x, rule: QuadratureRule) -> float:
    """``sum_i w_i / sqrt(2 pi) * max(0, rho(mu + sigma z_i) - rho_star)``.

    ``rule`` must be a Gauss-Hermite rule for the weight ``exp(-z^2/2)``.
    """
    mean, var = predict(inputs.posterior, np.asarray(x, dtype=float).reshape(-1))
    return gauss_hermite_expectation(mean, math.sqrt(var), inputs.potential, inputs.incumbent, rule)


def gauss_hermite_expectation(mean: float, std: float, potential: PotentialSpec,
                              incumbent: float, rule: QuadratureRule) -> float:
    vals = np.maximum(ep_value(potential, mean + std * rule.nodes) - incumbent, 0.0)
    return float(np.dot(rule.weights, vals) / rule.mass)


def _bisect(g, lo, hi, iters=200):
    glo = g(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        gm = g(mid)
        if (gm > 0.0) == (glo > 0.0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _kinks_in_unit(level: float) -> list[float]:
    """Non-negative u where u^2 exp(-u^2) - level changes sign, by bisection."""
    if level <= 0.0:
        return []
    if level >= INV_E:
        return [1.0]
    g = lambda u: u * u * math.exp(-u * u) - level  # noqa: E731
    far = 2.0
    while g(far) >= 0.0:
        far *= 2.0
    inner = _bisect(g, 0.0, 1.0)
    outer = _bisect(g, 1.0, far)
    return [inner, outer]


_LEGENDRE_CACHE: dict[int, QuadratureRule] = {}


def ei_cfx_piecewise(mean: float, std: float, potential: PotentialSpec, incumbent: float,
                     n_nodes: int = 64, z_max: float = 40.0, u_max: float = 30.0) -> float:
    """Composite Gauss-Legendre evaluation of ``E[max(0, rho(Y) - rho_star)]``.

    The integral over the standard normal variable ``z`` is split at every
    point where the integrand is not smooth (the superlevel boundaries, found
    by bisection, and the rectification point of AEP potentials), truncated
    to ``|z| <= z_max`` and to ``|y - center| <= u_max * width``, and every
    panel is at most ``min(1, width / std)`` long in ``z``.
    """
    incumbent = _check_incumbent(incumbent)
    if std <= 0.0:
        return max(float(ep_value(potential, mean)) - incumbent, 0.0)
    rule = _LEGENDRE_CACHE.get(n_nodes)
    if rule is None:
        rule = _LEGENDRE_CACHE.setdefault(n_nodes, gauss_legendre(n_nodes))
    m = mean - potential.center
    w = potential.width
    to_z = lambda u: (w * u - m) / std  # noqa: E731
    lo = max(-z_max, to_z(-u_max))
    hi = min(z_max, to_z(u_max))
    if potential.kind is PotentialKind.AEP_PLUS:
        lo = max(lo, to_z(0.0))
    elif potential.kind is PotentialKind.AEP_MINUS:
        hi = min(hi, to_z(0.0))
    if not lo < hi:
        return 0.0
    cuts = {lo, hi}
    for u in _kinks_in_unit(incumbent) + [0.0]:
        for sgn in (1.0, -1.0):
            zc = to_z(sgn * u)
            if lo < zc < hi:
                cuts.add(zc)
    cuts = sorted(cuts)
    panel = min(1.0, w / std)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        k = max(1, int(math.ceil((b - a) / panel)))
        edges = np.linspace(a, b, k + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        z = (mid[:, None] + half[:, None] * rule.nodes[None, :]).ravel()
        wts = (half[:, None] * rule.weights[None, :]).ravel()
        f = np.maximum(ep_value(potential, mean + std * z) - incumbent, 0.0)
        total += float(np.sum(wts * f * _INV_SQRT_2PI * np.exp(-0.5 * z * z)))
    return total


def ei_naive_moments(mean, std, incumbent: float):
    """Classic expected improvement ``s * (u Phi(u) + phi(u))``, ``u = (mu - incumbent) / s``."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (mean - incumbent) / np.where(std > 0.0, std, 1.0)
        val = std * (u * ndtr(u) + _INV_SQRT_2PI * np.exp(-0.5 * u * u))
    out = np.where(std > 0.0, np.maximum(val, 0.0), np.maximum(mean - incumbent, 0.0))
    return float(out) if out.ndim == 0 else out


def ei_naive_value_and_grad(posterior: GpPosterior, incumbent: float, X):
    mean, var, dmean, dvar = posterior.predict_with_grad(np.atleast_2d(X))
    std = np.sqrt(var)
    val = ei_naive_moments(mean, std, incumbent)
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(std > 0.0, std, 1.0)
        u = (mean - incumbent) / safe
        Phi = ndtr(u)
        phi = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
        dstd = np.where(std[:, None] > 1e-150, dvar / (2.0 * safe[:, None]), 0.0)
    # dEI/dmu = Phi(u), dEI/ds = phi(u)
    dm = np.where(std > 0.0, Phi, (mean > incumbent).astype(float))
    ds = np.where(std > 0.0, phi, 0.0)
    grad = dm[:, None] * dmean + ds[:, None] * dstd
    return np.atleast_1d(val), grad


def ei_naive(posterior_over_composition: GpPosterior, incumbent: float, x) -> float:
    """Expected improvement of a GP fitted directly on ``rho(f(x_i))``."""
    mean, var = predict(posterior_over_composition, np.asarray(x, dtype=float).reshape(-1))
    return float(ei_naive_moments(mean, math.sqrt(var), incumbent))
