"""Hot numeric kernels.

Every kernel has a loop implementation decorated with :func:`cfxbo._accel.jit`.
The batched kernels (RBF cross-covariance, closed-form EI-CFX and its partial
derivatives) also have a vectorised NumPy twin, which is what runs when numba
is disabled. The scalar iterative kernels (Lambert W, tridiagonal QL) run as
plain Python in that case.
"""

import math

import numpy as np
from scipy.special import erfc as _erfc_np

from ._accel import HAS_NUMBA, jit

INV_E = 0.36787944117144233
# 1/e - INV_E, for evaluating c + 1/e without cancellation near the branch point
_INV_E_LO = -1.2428753672788363e-17
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

AEP_PLUS = 0
AEP_MINUS = 1
SEP = 2

# ---------------------------------------------------------------------------
# Lambert W
# ---------------------------------------------------------------------------


@jit
def lambert_w_scalar(c, branch):
    """Real Lambert W on branch 0 or -1; NaN outside the real domain."""
    if math.isnan(c):
        return math.nan
    dist = (c + INV_E) + _INV_E_LO
    if dist < 0.0:
        # tolerate the rounding of -1/e itself
        if dist > -4e-16:
            dist = 0.0
        else:
            return math.nan
    if branch == -1 and c >= 0.0:
        return math.nan
    if c == 0.0:
        return 0.0
    if dist == 0.0:
        return -1.0

    sgn = 1.0 if branch == 0 else -1.0
    if dist < 0.3:
        # branch-point series in p = sqrt(2(ec + 1))
        p = sgn * math.sqrt(2.0 * math.e * dist)
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (
            -43.0 / 540.0 + p * (769.0 / 17280.0 + p * (-221.0 / 8505.0))))))
    elif branch == 0:
        if c < math.e:
            w = math.log1p(c)
        else:
            lc = math.log(c)
            w = lc - math.log(lc)
    else:
        lc = math.log(-c)
        w = lc - math.log(-lc)

    for _ in range(64):
        ew = math.exp(w)
        f = w * ew - c
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        dw = f / denom
        w_new = w - dw
        if branch == 0 and w_new < -1.0:
            w_new = -1.0
        elif branch == -1 and w_new > -1.0:
            w_new = -1.0
        if abs(w_new - w) <= 2e-16 * (1.0 + abs(w_new)):
            w = w_new
            break
        w = w_new
    return w


# ---------------------------------------------------------------------------
# Symmetric tridiagonal eigensolver (implicit QL, Wilkinson-type shift)
# ---------------------------------------------------------------------------


@jit
def tridiag_ql(diag, offdiag, max_iter):
    """Eigenvalues and first eigenvector components of a symmetric tridiagonal matrix.

    Only the first row of the eigenvector matrix is accumulated, which is all
    Golub-Welsch needs and keeps the cost at O(n^2).

    Returns ``(eigvals, first_components, status)``; ``status`` is 0 on
    success, otherwise ``1 + index`` of the eigenvalue that hit ``max_iter``.
    Output is sorted ascending.
    """
    n = diag.shape[0]
    d = diag.copy()
    e = np.zeros(n)
    for i in range(n - 1):
        e[i] = offdiag[i]
    z = np.zeros(n)
    z[0] = 1.0
    eps = 2.220446049250313e-16

    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                return d, z, l + 1
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                fz = z[i + 1]
                z[i + 1] = s * z[i] + c * fz
                z[i] = c * z[i] - s * fz
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0

    order = np.argsort(d)
    return d[order], z[order], 0


# ---------------------------------------------------------------------------
# RBF cross-covariance
# ---------------------------------------------------------------------------


@jit
def _rbf_cross_loop(X, Y, inv_ls, signal_variance):
    n, d = X.shape
    m = Y.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                t = (X[i, k] - Y[j, k]) * inv_ls[k]
                acc += t * t
            out[i, j] = signal_variance * math.exp(-0.5 * acc)
    return out


def _rbf_cross_numpy(X, Y, inv_ls, signal_variance):
    diff = (X[:, None, :] - Y[None, :, :]) * inv_ls
    return signal_variance * np.exp(-0.5 * np.einsum("ijk,ijk->ij", diff, diff))


# ---------------------------------------------------------------------------
# Closed-form EI-CFX, scalar loop version
# ---------------------------------------------------------------------------


@jit
def _pdf(x):
    if math.isinf(x):
        return 0.0
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


@jit
def _xk_pdf(x, k):
    if math.isinf(x):
        return 0.0
    return x ** k * _INV_SQRT_2PI * math.exp(-0.5 * x * x)


@jit
def _mass(a, b):
    """Phi(b) - Phi(a) for a <= b, evaluated on the tail side to keep relative accuracy."""
    if a >= 0.0:
        return 0.5 * (math.erfc(a / _SQRT2) - math.erfc(b / _SQRT2))
    if b <= 0.0:
        return 0.5 * (math.erfc(-b / _SQRT2) - math.erfc(-a / _SQRT2))
    return 1.0 - 0.5 * math.erfc(-a / _SQRT2) - 0.5 * math.erfc(b / _SQRT2)


@jit
def _limits(m, s, w, r0, r1):
    tau_lo = (w * r0 - m) / s
    tau_hi = math.inf if math.isinf(r1) else (w * r1 - m) / s
    return tau_lo, tau_hi


@jit
def _aep_plus_value(m, s, w, rho_star, r0, r1):
    if s <= 0.0:
        v = m / w
        rho = v * v * math.exp(-v * v) if v > 0.0 else 0.0
        return max(rho - rho_star, 0.0)
    tau_lo, tau_hi = _limits(m, s, w, r0, r1)
    if not tau_lo < tau_hi:
        return 0.0
    kappa = w * w + 2.0 * s * s
    sk = math.sqrt(kappa)
    b = 2.0 * m * s / kappa
    z_lo = sk / w * (b + tau_lo)
    z_hi = math.inf if math.isinf(tau_hi) else sk / w * (b + tau_hi)
    C = math.exp(-m * m / kappa) / (w * sk)
    gamma = m * w * w / kappa
    eta = w * s / sk
    I = C * ((gamma * gamma + eta * eta) * _mass(z_lo, z_hi)
             - 2.0 * eta * gamma * (_pdf(z_hi) - _pdf(z_lo))
             - eta * eta * (_xk_pdf(z_hi, 1) - _xk_pdf(z_lo, 1)))
    return max(I - rho_star * _mass(tau_lo, tau_hi), 0.0)


@jit
def _aep_plus_partials(m, s, w, rho_star, r0, r1):
    """(d/dm, d/ds) of the one-sided value; boundary terms vanish because the
    integrand is zero at every limit."""
    if s <= 0.0:
        v = m / w
        if v > 0.0:
            ev = math.exp(-v * v)
            if v * v * ev > rho_star:
                return 2.0 * v * (1.0 - v * v) * ev / w, 0.0
        return 0.0, 0.0
    tau_lo, tau_hi = _limits(m, s, w, r0, r1)
    if not tau_lo < tau_hi:
        return 0.0, 0.0
    kappa = w * w + 2.0 * s * s
    sk = math.sqrt(kappa)
    b = 2.0 * m * s / kappa
    z_lo = sk / w * (b + tau_lo)
    z_hi = math.inf if math.isinf(tau_hi) else sk / w * (b + tau_hi)
    C = math.exp(-m * m / kappa) / (w * sk)
    gamma = m * w * w / kappa
    eta = w * s / sk
    t = w / sk
    # truncated Gaussian moments of zeta^k
    m0 = _mass(z_lo, z_hi)
    m1 = -(_pdf(z_hi) - _pdf(z_lo))
    m2 = -(_xk_pdf(z_hi, 1) - _xk_pdf(z_lo, 1)) + m0
    m3 = -(_xk_pdf(z_hi, 2) - _xk_pdf(z_lo, 2)) + 2.0 * m1
    m4 = -(_xk_pdf(z_hi, 3) - _xk_pdf(z_lo, 3)) + 3.0 * m2
    iw2 = 1.0 / (w * w)
    # v - v^3/w^2 with v = gamma + eta*zeta
    c0 = gamma - gamma ** 3 * iw2
    c1 = eta - 3.0 * gamma * gamma * eta * iw2
    c2 = -3.0 * gamma * eta * eta * iw2
    c3 = -(eta ** 3) * iw2
    # times z = t*zeta - b
    q0 = -b * c0
    q1 = t * c0 - b * c1
    q2 = t * c1 - b * c2
    q3 = t * c2 - b * c3
    q4 = t * c3
    dm = 2.0 * C * (c0 * m0 + c1 * m1 + c2 * m2 + c3 * m3)
    ds = 2.0 * C * (q0 * m0 + q1 * m1 + q2 * m2 + q3 * m3 + q4 * m4)
    return dm, ds


@jit
def _ei_value_loop(m, s, w, rho_star, r0, r1, kind):
    n = m.shape[0]
    out = np.empty(n)
    for i in range(n):
        v = 0.0
        if kind != AEP_MINUS:
            v += _aep_plus_value(m[i], s[i], w, rho_star, r0, r1)
        if kind != AEP_PLUS:
            v += _aep_plus_value(-m[i], s[i], w, rho_star, r0, r1)
        out[i] = v
    return out


@jit
def _ei_partials_loop(m, s, w, rho_star, r0, r1, kind):
    n = m.shape[0]
    dm = np.zeros(n)
    ds = np.zeros(n)
    for i in range(n):
        if kind != AEP_MINUS:
            a, b = _aep_plus_partials(m[i], s[i], w, rho_star, r0, r1)
            dm[i] += a
            ds[i] += b
        if kind != AEP_PLUS:
            a, b = _aep_plus_partials(-m[i], s[i], w, rho_star, r0, r1)
            dm[i] -= a
            ds[i] += b
    return dm, ds


# ---------------------------------------------------------------------------
# Closed-form EI-CFX, vectorised NumPy version
# ---------------------------------------------------------------------------


def _pdf_np(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _xk_pdf_np(x, k):
    finite = np.isfinite(x)
    xs = np.where(finite, x, 0.0)
    return np.where(finite, xs ** k * _pdf_np(xs), 0.0)


def _mass_np(a, b):
    upper = 0.5 * (_erfc_np(a / _SQRT2) - _erfc_np(b / _SQRT2))
    lower = 0.5 * (_erfc_np(-b / _SQRT2) - _erfc_np(-a / _SQRT2))
    middle = 1.0 - 0.5 * _erfc_np(-a / _SQRT2) - 0.5 * _erfc_np(b / _SQRT2)
    return np.where(a >= 0.0, upper, np.where(b <= 0.0, lower, middle))


def _terms_np(m, s, w, r0, r1):
    with np.errstate(divide="ignore", invalid="ignore"):
        safe_s = np.where(s > 0.0, s, 1.0)
        tau_lo = (w * r0 - m) / safe_s
        tau_hi = np.full_like(m, np.inf) if math.isinf(r1) else (w * r1 - m) / safe_s
        kappa = w * w + 2.0 * s * s
        sk = np.sqrt(kappa)
        b = 2.0 * m * s / kappa
        z_lo = sk / w * (b + tau_lo)
        z_hi = sk / w * (b + tau_hi)
        C = np.exp(-m * m / kappa) / (w * sk)
        gamma = m * w * w / kappa
        eta = w * s / sk
    active = (s > 0.0) & (tau_lo < tau_hi)
    return tau_lo, tau_hi, sk, b, z_lo, z_hi, C, gamma, eta, active


def _aep_plus_value_np(m, s, w, rho_star, r0, r1):
    tau_lo, tau_hi, sk, b, z_lo, z_hi, C, gamma, eta, active = _terms_np(m, s, w, r0, r1)
    with np.errstate(invalid="ignore"):
        I = C * ((gamma * gamma + eta * eta) * _mass_np(z_lo, z_hi)
                 - 2.0 * eta * gamma * (_pdf_np(z_hi) - _pdf_np(z_lo))
                 - eta * eta * (_xk_pdf_np(z_hi, 1) - _xk_pdf_np(z_lo, 1)))
        val = np.maximum(I - rho_star * _mass_np(tau_lo, tau_hi), 0.0)
    v = m / w
    rho0 = np.where(v > 0.0, v * v * np.exp(-v * v), 0.0)
    degenerate = np.maximum(rho0 - rho_star, 0.0)
    return np.where(s > 0.0, np.where(active, val, 0.0), degenerate)


def _aep_plus_partials_np(m, s, w, rho_star, r0, r1):
    tau_lo, tau_hi, sk, b, z_lo, z_hi, C, gamma, eta, active = _terms_np(m, s, w, r0, r1)
    t = w / sk
    with np.errstate(invalid="ignore"):
        m0 = _mass_np(z_lo, z_hi)
        m1 = -(_pdf_np(z_hi) - _pdf_np(z_lo))
        m2 = -(_xk_pdf_np(z_hi, 1) - _xk_pdf_np(z_lo, 1)) + m0
        m3 = -(_xk_pdf_np(z_hi, 2) - _xk_pdf_np(z_lo, 2)) + 2.0 * m1
        m4 = -(_xk_pdf_np(z_hi, 3) - _xk_pdf_np(z_lo, 3)) + 3.0 * m2
    iw2 = 1.0 / (w * w)
    c0 = gamma - gamma ** 3 * iw2
    c1 = eta - 3.0 * gamma * gamma * eta * iw2
    c2 = -3.0 * gamma * eta * eta * iw2
    c3 = -(eta ** 3) * iw2
    dm = 2.0 * C * (c0 * m0 + c1 * m1 + c2 * m2 + c3 * m3)
    ds = 2.0 * C * (-b * c0 * m0 + (t * c0 - b * c1) * m1 + (t * c1 - b * c2) * m2
                    + (t * c2 - b * c3) * m3 + t * c3 * m4)
    v = m / w
    ev = np.exp(-v * v)
    inside = (v > 0.0) & (v * v * ev > rho_star)
    dm0 = np.where(inside, 2.0 * v * (1.0 - v * v) * ev / w, 0.0)
    dm = np.where(s > 0.0, np.where(active, dm, 0.0), dm0)
    ds = np.where((s > 0.0) & active, ds, 0.0)
    return dm, ds


def _ei_value_numpy(m, s, w, rho_star, r0, r1, kind):
    out = np.zeros_like(m)
    if kind != AEP_MINUS:
        out = out + _aep_plus_value_np(m, s, w, rho_star, r0, r1)
    if kind != AEP_PLUS:
        out = out + _aep_plus_value_np(-m, s, w, rho_star, r0, r1)
    return out


def _ei_partials_numpy(m, s, w, rho_star, r0, r1, kind):
    dm = np.zeros_like(m)
    ds = np.zeros_like(m)
    if kind != AEP_MINUS:
        a, b = _aep_plus_partials_np(m, s, w, rho_star, r0, r1)
        dm, ds = dm + a, ds + b
    if kind != AEP_PLUS:
        a, b = _aep_plus_partials_np(-m, s, w, rho_star, r0, r1)
        dm, ds = dm - a, ds + b
    return dm, ds


if HAS_NUMBA:
    rbf_cross = _rbf_cross_loop
    ei_value_batch = _ei_value_loop
    ei_partials_batch = _ei_partials_loop
else:
    rbf_cross = _rbf_cross_numpy
    ei_value_batch = _ei_value_numpy
    ei_partials_batch = _ei_partials_numpy
