"""Orthogonal polynomials and Gaussian quadrature via Golub-Welsch.

Recurrences are stored in monic form,

    p_{k+1}(x) = (x - alpha_k) p_k(x) - beta_k p_{k-1}(x),

whose symmetric Jacobi matrix has ``alpha`` on the diagonal and
``sqrt(beta_k)`` off it. The eigenvalues of the n x n leading block are the
nodes of the n-point Gauss rule and ``mu0 * v[0]**2`` (first component of
each normalised eigenvector) are the weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._kernels import tridiag_ql

__all__ = [
    "RecurrenceCoeffs",
    "QuadratureRule",
    "QuadratureError",
    "hermite_coeffs",
    "legendre_coeffs",
    "stieltjes_coeffs",
    "grid_inner_product",
    "golub_welsch",
    "gauss_hermite",
    "gauss_legendre",
    "integrate",
    "eval_orthopoly",
    "symmetric_tridiagonal_eig",
    "write_rule_csv",
    "read_rule_csv",
]

MAX_QL_ITER = 50


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class RecurrenceCoeffs:
    """Monic three-term recurrence coefficients.

    ``alpha[k]`` for ``k = 0..N-1``; ``beta[k-1]`` holds beta_k for
    ``k = 1..N-1``; ``mu0`` is the total mass of the weight. ``lead[k]`` is
    the leading coefficient of the family's conventional normalisation
    (all ones for monic families), used only by :func:`eval_orthopoly`.
    """

    alpha: np.ndarray
    beta: np.ndarray
    mu0: float
    lead: np.ndarray = field(default=None)
    name: str = "custom"

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if alpha.ndim != 1 or alpha.size < 1:
            raise ValueError("alpha must be a non-empty vector")
        if beta.shape != (alpha.size - 1,):
            raise ValueError(f"beta must have length {alpha.size - 1}, got {beta.shape}")
        if np.any(beta <= 0.0):
            raise ValueError("beta must be strictly positive (positive-definite measure)")
        if not self.mu0 > 0.0:
            raise ValueError("mu0 must be positive")
        lead = np.ones(alpha.size) if self.lead is None else np.asarray(self.lead, dtype=float)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "lead", lead)

    @property
    def order(self) -> int:
        return self.alpha.size

    @property
    def offdiag(self) -> np.ndarray:
        return np.sqrt(self.beta)

    def jacobi(self, n: int | None = None) -> np.ndarray:
        n = self.order if n is None else n
        J = np.diag(self.alpha[:n])
        off = self.offdiag[: n - 1]
        return J + np.diag(off, 1) + np.diag(off, -1)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    mass: float

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    def __len__(self):
        return self.nodes.size

    def scaled(self, lo: float, hi: float) -> "QuadratureRule":
        """Affine map of a rule on [-1, 1] onto [lo, hi]."""
        half = 0.5 * (hi - lo)
        return QuadratureRule(0.5 * (hi + lo) + half * self.nodes, half * self.weights, half * self.mass)


def hermite_coeffs(n: int) -> RecurrenceCoeffs:
    """Probabilist's Hermite, weight ``exp(-x**2/2)`` on the real line."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(1, n, dtype=float)
    return RecurrenceCoeffs(np.zeros(n), k, math.sqrt(2.0 * math.pi), name="hermite")


def legendre_coeffs(n: int) -> RecurrenceCoeffs:
    """Legendre, weight 1 on [-1, 1]; ``lead`` converts monic to ``P_n(1) = 1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(1, n, dtype=float)
    beta = k * k / (4.0 * k * k - 1.0)
    j = np.arange(n, dtype=float)
    lead = np.exp([math.lgamma(2 * i + 1) - i * math.log(2.0) - 2 * math.lgamma(i + 1) for i in j])
    return RecurrenceCoeffs(np.zeros(n), beta, 2.0, lead=lead, name="legendre")


def grid_inner_product(x, weight) -> Callable:
    """Discrete inner product ``<f|g> = sum f(x) g(x) weight`` for :func:`stieltjes_coeffs`."""
    x = np.asarray(x, dtype=float)
    weight = np.asarray(weight, dtype=float)

    def inner(f, g):
        return float(np.sum(f(x) * g(x) * weight))

    return inner


def stieltjes_coeffs(inner_product: Callable, n: int) -> RecurrenceCoeffs:
    """Recurrence coefficients of the monic orthogonal polynomials of an inner product.

    This is Gram-Schmidt on the monomials written as the Stieltjes procedure:
    ``alpha_k = <x p_k|p_k> / <p_k|p_k>`` and
    ``beta_k = <p_k|p_k> / <p_{k-1}|p_{k-1}>``.

    Parameters
    ----------
    inner_product : callable
        ``inner_product(f, g)`` for vectorised callables ``f`` and ``g``.
    n : int
        Number of ``alpha`` coefficients to compute.

    Raises
    ------
    QuadratureError
        If some ``<p_k|p_k>`` is not positive.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha: list[float] = []
    beta: list[float] = []

    def poly(k):
        a = np.array(alpha[:k])
        b = np.array(beta[:k])

        def p(x):
            x = np.asarray(x, dtype=float)
            prev = np.zeros_like(x)
            cur = np.ones_like(x)
            for j in range(k):
                prev, cur = cur, (x - a[j]) * cur - (b[j - 1] * prev if j > 0 else 0.0)
            return cur

        return p

    mu0 = inner_product(poly(0), poly(0))
    if not mu0 > 0.0:
        raise QuadratureError("inner product is not positive on the constant polynomial")
    norm_prev = mu0
    for k in range(n):
        pk = poly(k)
        if k > 0:
            norm = inner_product(pk, pk)
            if not norm > 0.0:
                raise QuadratureError(f"non-positive norm at order {k}: measure not positive definite")
            beta.append(norm / norm_prev)
            norm_prev = norm
        alpha.append(inner_product(lambda x, pk=pk: x * pk(x), pk) / norm_prev)
    return RecurrenceCoeffs(np.array(alpha), np.array(beta), mu0, name="stieltjes")


def symmetric_tridiagonal_eig(diag, offdiag) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and first eigenvector components (implicit QL)."""
    diag = np.ascontiguousarray(diag, dtype=float)
    offdiag = np.ascontiguousarray(offdiag, dtype=float)
    if offdiag.size != max(diag.size - 1, 0):
        raise ValueError("offdiag must have length len(diag) - 1")
    if offdiag.size == 0:
        offdiag = np.zeros(1)
    vals, first, status = tridiag_ql(diag, offdiag, MAX_QL_ITER)
    if status:
        raise QuadratureError(f"QL iteration did not converge for eigenvalue {status - 1}")
    return vals, first


def golub_welsch(coeffs: RecurrenceCoeffs, n: int | None = None) -> QuadratureRule:
    """n-point Gauss rule for the measure encoded by ``coeffs``."""
    n = coeffs.order if n is None else n
    if not 1 <= n <= coeffs.order:
        raise ValueError(f"n must lie in [1, {coeffs.order}]")
    nodes, first = symmetric_tridiagonal_eig(coeffs.alpha[:n], coeffs.offdiag[: n - 1])
    weights = coeffs.mu0 * first * first
    return QuadratureRule(nodes, weights, coeffs.mu0)


def gauss_hermite(n: int) -> QuadratureRule:
    return golub_welsch(hermite_coeffs(n), n)


def gauss_legendre(n: int) -> QuadratureRule:
    return golub_welsch(legendre_coeffs(n), n)


def integrate(rule: QuadratureRule, fn: Callable) -> float:
    """``sum_i w_i fn(x_i)``; ``fn`` may be vectorised or scalar."""
    try:
        vals = np.asarray(fn(rule.nodes), dtype=float)
        if vals.shape != rule.nodes.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([fn(float(x)) for x in rule.nodes], dtype=float)
    return float(np.dot(rule.weights, vals))


def eval_orthopoly(coeffs: RecurrenceCoeffs, k: int, x):
    """k-th orthogonal polynomial by forward recurrence, scaled by ``coeffs.lead[k]``."""
    if not 0 <= k <= coeffs.order:
        raise ValueError(f"k must lie in [0, {coeffs.order}]")
    x = np.asarray(x, dtype=float)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    for j in range(k):
        nxt = (x - coeffs.alpha[j]) * cur
        if j > 0:
            nxt -= coeffs.beta[j - 1] * prev
        prev, cur = cur, nxt
    lead = coeffs.lead[k] if k < coeffs.lead.size else 1.0
    out = lead * cur
    return float(out) if out.ndim == 0 else out


def write_rule_csv(rule: QuadratureRule, fh) -> None:
    fh.write(f"# mass={rule.mass:.17g}\n")
    fh.write("node,weight\n")
    for x, w in zip(rule.nodes, rule.weights):
        fh.write(f"{x:.17g},{w:.17g}\n")


def read_rule_csv(fh) -> QuadratureRule:
    mass = None
    nodes, weights = [], []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() == "mass":
                mass = float(val)
            continue
        if line.startswith("node"):
            continue
        x, w = line.split(",")
        nodes.append(float(x))
        weights.append(float(w))
    if mass is None:
        mass = float(np.sum(weights))
    return QuadratureRule(np.array(nodes), np.array(weights), mass)
