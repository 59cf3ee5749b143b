"""Zero-mean Gaussian-process regression with an RBF kernel.

Posteriors are immutable once fitted. With ``standardize=True`` the outputs
are centred and scaled by the sample standard deviation before conditioning
and predictions are mapped back, which is what the search driver uses; the
default keeps the plain zero-mean model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from ._kernels import rbf_cross

__all__ = [
    "KernelParams",
    "SampleSet",
    "GpPosterior",
    "CholeskyError",
    "rbf_kernel",
    "fit",
    "predict",
    "log_marginal_likelihood",
    "fit_hyperparameters",
]

DEFAULT_JITTER = 1e-10
MAX_JITTER = 1e-4
_LOG_2PI = math.log(2.0 * math.pi)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class CholeskyError(LinAlgError):
    """Gram matrix not positive definite even at the maximum jitter."""


@dataclass(frozen=True)
class KernelParams:
    lengthscale: np.ndarray
    signal_variance: float = 1.0
    jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscale, dtype=float))
        if np.any(ls <= 0.0) or not np.all(np.isfinite(ls)):
            raise ValueError("lengthscales must be positive and finite")
        if not self.signal_variance > 0.0:
            raise ValueError("signal_variance must be positive")
        if self.jitter < 0.0:
            raise ValueError("jitter must be non-negative")
        object.__setattr__(self, "lengthscale", ls)

    def inv_lengthscale(self, dim: int) -> np.ndarray:
        ls = self.lengthscale
        if ls.size == 1:
            ls = np.full(dim, ls[0])
        elif ls.size != dim:
            raise ValueError(f"kernel has {ls.size} lengthscales, inputs have dimension {dim}")
        return 1.0 / ls

    def to_dict(self) -> dict:
        return {"lengthscale": self.lengthscale.tolist(), "signal_variance": self.signal_variance,
                "jitter": self.jitter}


@dataclass(frozen=True)
class SampleSet:
    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.outputs, dtype=float).reshape(-1)
        if X.shape[0] != y.size:
            raise ValueError("inputs and outputs differ in length")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", y)

    def __len__(self):
        return self.outputs.size

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def append(self, x, y) -> "SampleSet":
        return SampleSet(np.vstack([self.inputs, np.atleast_2d(x)]), np.append(self.outputs, y))


def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    X = x.reshape(1, -1) if single else x
    if X.shape[1] != dim:
        raise ValueError(f"point dimension {X.shape[1]} does not match model dimension {dim}")
    return np.ascontiguousarray(X), single


def rbf_kernel(kernel: KernelParams, x, y) -> float:
    """``s2 * exp(-0.5 * sum(((x - y) / l)**2))`` for single points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    inv = kernel.inv_lengthscale(x.size)
    t = (x - y) * inv
    return float(kernel.signal_variance * math.exp(-0.5 * float(t @ t)))


def _gram(kernel: KernelParams, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    inv = np.ascontiguousarray(kernel.inv_lengthscale(X.shape[1]))
    return rbf_cross(np.ascontiguousarray(X), np.ascontiguousarray(Y), inv, float(kernel.signal_variance))


def _cholesky(K: np.ndarray, jitter: float, escalate: bool) -> tuple[np.ndarray, float]:
    n = K.shape[0]
    j = jitter
    while True:
        try:
            L = cholesky(K + j * np.eye(n), lower=True, check_finite=False)
            if np.all(np.isfinite(L)):
                return L, j
        except LinAlgError:
            pass
        if not escalate or j >= MAX_JITTER:
            raise CholeskyError(f"Gram matrix not positive definite at jitter {j:g}")
        j = max(j * 10.0, 1e-12)
        j = min(j, MAX_JITTER)


@dataclass(frozen=True)
class GpPosterior:
    kernel: KernelParams
    data: SampleSet
    factor: np.ndarray
    dual_weights: np.ndarray
    y_shift: float = 0.0
    y_scale: float = 1.0

    @property
    def dim(self) -> int:
        return self.data.dim

    def predict(self, x):
        return predict(self, x)

    def predict_with_grad(self, x):
        """Mean, variance and their gradients at points ``x`` of shape (m, d).

        Returns ``(mean, var, dmean, dvar)`` with gradients of shape (m, d).
        """
        X, _ = _as_points(x, self.dim)
        Xd = self.data.inputs
        inv = self.kernel.inv_lengthscale(self.dim)
        Kx = _gram(self.kernel, X, Xd)  # (m, n)
        v = solve_triangular(self.factor, Kx.T, lower=True, check_finite=False)  # (n, m)
        Kinv_k = solve_triangular(self.factor.T, v, lower=False, check_finite=False)  # (n, m)
        mean = Kx @ self.dual_weights
        var = self.kernel.signal_variance - np.einsum("ij,ij->j", v, v)
        # d k(x, x_i) / dx = -k(x, x_i) (x - x_i) / l^2
        diff = (X[:, None, :] - Xd[None, :, :]) * (inv * inv)  # (m, n, d)
        dK = -Kx[:, :, None] * diff
        dmean = np.einsum("mnd,n->md", dK, self.dual_weights)
        dvar = -2.0 * np.einsum("mnd,nm->md", dK, Kinv_k)
        s = self.y_scale
        var = np.maximum(var, 0.0)
        return self.y_shift + s * mean, s * s * var, s * dmean, s * s * dvar


def fit(data: SampleSet, kernel: KernelParams, standardize: bool = False,
        escalate_jitter: bool = True) -> GpPosterior:
    """Condition the GP prior on ``data``.

    Raises
    ------
    CholeskyError
        If the Gram matrix stays indefinite up to the maximum jitter.
    """
    if len(data) == 0:
        raise ValueError("cannot fit on an empty sample set")
    y = data.outputs
    shift, scale = 0.0, 1.0
    if standardize:
        shift = float(np.mean(y))
        sd = float(np.std(y))
        scale = sd if sd > 0.0 else 1.0
    ys = (y - shift) / scale
    K = _gram(kernel, data.inputs, data.inputs)
    L, j = _cholesky(K, kernel.jitter, escalate_jitter)
    if j != kernel.jitter:
        kernel = replace(kernel, jitter=j)
    alpha = cho_solve((L, True), ys, check_finite=False)
    return GpPosterior(kernel, data, L, alpha, shift, scale)


def predict(post: GpPosterior, x):
    """Posterior mean and variance at a point (scalars) or points (arrays)."""
    X, single = _as_points(x, post.dim)
    Kx = _gram(post.kernel, X, post.data.inputs)
    mean = Kx @ post.dual_weights
    v = solve_triangular(post.factor, Kx.T, lower=True, check_finite=False)
    var = np.maximum(post.kernel.signal_variance - np.einsum("ij,ij->j", v, v), 0.0)
    mean = post.y_shift + post.y_scale * mean
    var = post.y_scale ** 2 * var
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def log_marginal_likelihood(data: SampleSet, kernel: KernelParams, escalate_jitter: bool = False) -> float:
    """``-0.5 y^T a - sum(log diag L) - n/2 log(2 pi)`` on the raw outputs."""
    K = _gram(kernel, data.inputs, data.inputs)
    L, _ = _cholesky(K, kernel.jitter, escalate_jitter)
    y = data.outputs
    alpha = cho_solve((L, True), y, check_finite=False)
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * y.size * _LOG_2PI)


def _negative_lml(theta, sq, ys, jitter) -> float:
    """Negative log marginal likelihood at log-hyperparameters ``theta``.

    ``sq`` holds per-dimension squared distances, shape (d, n, n).
    """
    d, n = sq.shape[0], ys.size
    K = math.exp(theta[d]) * np.exp(-0.5 * np.tensordot(np.exp(-2.0 * theta[:d]), sq, axes=1))
    j = jitter
    while True:
        try:
            L = np.linalg.cholesky(K + j * np.eye(n))
            break
        except np.linalg.LinAlgError:
            if j >= MAX_JITTER:
                return math.inf
            j = min(max(j * 10.0, 1e-12), MAX_JITTER)
    a = solve_triangular(L, ys, lower=True, check_finite=False)
    return float(0.5 * a @ a + np.sum(np.log(np.diag(L))) + 0.5 * n * _LOG_2PI)


def _golden_max(f, lo, hi, iters=20):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def fit_hyperparameters(data: SampleSet, input_range, rng: np.random.Generator,
                        restarts: int = 5, sweeps: int = 2, jitter: float = DEFAULT_JITTER) -> KernelParams:
    """Maximum-likelihood RBF hyperparameters on standardised outputs.

    Coordinate-wise golden-section search in log space over one lengthscale
    per input dimension and the signal variance, from a fixed start plus
    ``restarts - 1`` random ones. Bounds: lengthscale in
    ``[1e-3, 1e3] * input_range``, signal variance in ``[1e-6, 1e6]`` (the
    standardised output variance is 1).
    """
    input_range = np.atleast_1d(np.asarray(input_range, dtype=float))
    d = data.dim
    if input_range.size == 1:
        input_range = np.full(d, input_range[0])
    input_range = np.where(input_range > 0.0, input_range, 1.0)
    y = data.outputs
    sd = float(np.std(y))
    ys = (y - np.mean(y)) / (sd if sd > 0.0 else 1.0)

    lo = np.concatenate([np.log(1e-3 * input_range), [math.log(1e-6)]])
    hi = np.concatenate([np.log(1e3 * input_range), [math.log(1e6)]])
    X = data.inputs
    sq = np.moveaxis((X[:, None, :] - X[None, :, :]) ** 2, 2, 0)  # (d, n, n), reused for every trial

    def objective(theta):
        return -_negative_lml(theta, sq, ys, jitter)

    # deterministic first start at a moderate lengthscale, then random starts
    starts = [np.concatenate([np.log(0.3 * input_range), [0.0]])]
    mid_lo = np.concatenate([np.log(0.05 * input_range), [math.log(0.1)]])
    mid_hi = np.concatenate([np.log(3.0 * input_range), [math.log(10.0)]])
    for _ in range(restarts - 1):
        starts.append(mid_lo + rng.uniform(size=d + 1) * (mid_hi - mid_lo))

    best_theta, best_val = starts[0], -math.inf
    for theta in starts:
        theta = theta.copy()
        val = objective(theta)
        for _ in range(sweeps):
            for j in range(d + 1):
                def along(t, j=j):
                    th = theta.copy()
                    th[j] = t
                    return objective(th)
                t, v = _golden_max(along, lo[j], hi[j])
                if v > val:
                    theta[j], val = t, v
        if val > best_val:
            best_theta, best_val = theta, val
    return KernelParams(np.exp(best_theta[:d]), math.exp(best_theta[d]), jitter)
