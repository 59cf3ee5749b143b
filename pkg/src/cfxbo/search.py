"""Counterfactual search drivers.

``run_bayes_cfx`` models the black-box ``f`` with a GP and maximises EI-CFX;
``run_bayes_naive`` models the composite ``rho(f(x))`` and maximises plain EI;
``run_random`` samples uniformly; ``projected_gradient_search`` is the
local recurrence ``x <- P[x + eta * grad rho(f(x))]``.

All drivers draw randomness from ``numpy.random.Generator(PCG64(seed))`` only,
so a (problem, potential, budget, seed) tuple reproduces its trace exactly.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.stats import qmc

from .acquisition import AcquisitionInputs, ei_cfx_value_and_grad, ei_naive_value_and_grad
from .potential import INV_E, PotentialSpec, ep_derivative, ep_value
from .surrogate import CholeskyError, GpPosterior, SampleSet, fit, fit_hyperparameters

__all__ = [
    "InfeasibleError",
    "SearchProblem",
    "LocalOptParams",
    "LocalOptResult",
    "TraceRecord",
    "Trace",
    "AcquisitionMax",
    "initial_design",
    "fit_surrogate",
    "optimize_acquisition",
    "run_bayes_cfx",
    "run_bayes_naive",
    "run_random",
    "run_multi_cfx",
    "run_localopt",
    "projected_gradient_search",
    "localopt_residual",
    "grid_rho_star",
]

N_INIT = 5
N_STARTS = 32
ASCENT_ITERS = 120
DEDUP_TOL = 1e-9
FEAS_TOL = 1e-9
MAX_ENUM_DIM = 12


class InfeasibleError(ValueError):
    """The constrained search region is empty."""


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class SearchProblem:
    """Black-box model, query point and feasible region.

    Parameters
    ----------
    model : callable
        ``model(x) -> float`` for a 1-D array ``x``.
    query : array_like
        The point being explained; must lie strictly inside ``bounds``.
    bounds : array_like, shape (d, 2)
        Box constraints.
    A, b : array_like, optional
        Linear constraints ``A x <= b``.
    integer_dims : sequence of int
        Coordinates rounded to integers at evaluation time.
    l0_bound : int, optional
        Maximum number of coordinates allowed to differ from the query.
    sign : sequence of {-1, 0, 1}, optional
        Per coordinate: 1 increase-only, -1 decrease-only, 0 free.
    model_grad : callable, optional
        Analytic gradient of ``model``; only used by the local search.
    """

    model: Callable
    query: np.ndarray
    bounds: np.ndarray
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    integer_dims: tuple = ()
    l0_bound: Optional[int] = None
    sign: Optional[tuple] = None
    model_grad: Optional[Callable] = None
    feature_names: Optional[list] = None

    def __post_init__(self):
        self.query = np.asarray(self.query, dtype=float).reshape(-1)
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        d = self.query.size
        if self.bounds.shape[0] != d:
            raise ValueError(f"bounds have {self.bounds.shape[0]} rows, query has dimension {d}")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if np.any(lo >= hi):
            raise ValueError("every box must satisfy lower < upper")
        if np.any(self.query <= lo) or np.any(self.query >= hi):
            raise ValueError("query must lie strictly inside the box")
        if (self.A is None) != (self.b is None):
            raise ValueError("A and b must be given together")
        if self.A is not None:
            self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
            self.b = np.asarray(self.b, dtype=float).reshape(-1)
            if self.A.shape != (self.b.size, d):
                raise ValueError("A must have shape (len(b), d)")
        self.integer_dims = tuple(sorted(int(i) for i in self.integer_dims))
        for i in self.integer_dims:
            if not 0 <= i < d:
                raise ValueError(f"integer dimension {i} out of range")
            if self.query[i] != round(self.query[i]):
                raise ValueError(f"query coordinate {i} must be an integer")
        if self.l0_bound is not None:
            self.l0_bound = int(self.l0_bound)
            if not 1 <= self.l0_bound <= d:
                raise ValueError("l0_bound must lie in [1, dimension]")
        if self.sign is None:
            self.sign = (0,) * d
        self.sign = tuple(int(np.sign(s)) for s in self.sign)
        if len(self.sign) != d:
            raise ValueError("sign must have one entry per dimension")
        self.lower = lo.copy()
        self.upper = hi.copy()
        for j, s in enumerate(self.sign):
            if s > 0:
                self.lower[j] = self.query[j]
            elif s < 0:
                self.upper[j] = self.query[j]
        for j in self.integer_dims:
            self.lower[j] = math.ceil(self.lower[j] - 1e-12)
            self.upper[j] = math.floor(self.upper[j] + 1e-12)
        self._int_mask = np.zeros(d, dtype=bool)
        self._int_mask[list(self.integer_dims)] = True

    @property
    def dim(self) -> int:
        return self.query.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def evaluate(self, x) -> float:
        return float(self.model(np.asarray(x, dtype=float)))

    def check_feasible(self) -> None:
        """Raise :class:`InfeasibleError` if box, sign and linear constraints admit no point."""
        if np.any(self.lower > self.upper):
            raise InfeasibleError("box and sign/integer constraints leave an empty interval")
        if self.A is None:
            return
        res = linprog(np.zeros(self.dim), A_ub=self.A, b_ub=self.b,
                      bounds=list(zip(self.lower, self.upper)), method="highs")
        if res.status != 0:
            raise InfeasibleError("linear constraints are infeasible within the box")

    def is_feasible(self, x, tol: float = FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return False
        if self.A is not None and np.any(self.A @ x > self.b + tol):
            return False
        if self.integer_dims and np.any(x[self._int_mask] != np.round(x[self._int_mask])):
            return False
        if self.l0_bound is not None and np.count_nonzero(x != self.query) > self.l0_bound:
            return False
        return True

    def subsets(self, rng: np.random.Generator | None = None) -> list[np.ndarray]:
        """Free-coordinate masks honouring the l0 bound."""
        d = self.dim
        movable = self.width > 0.0
        k = self.l0_bound
        if k is None or k >= d:
            return [movable.copy()]
        if d <= MAX_ENUM_DIM:
            combos = itertools.combinations(range(d), k)
        else:
            rng = make_rng(0) if rng is None else rng
            combos = {tuple(sorted(rng.choice(d, k, replace=False))) for _ in range(64)}
            combos = sorted(combos)
        masks = []
        for c in combos:
            m = np.zeros(d, dtype=bool)
            m[list(c)] = True
            masks.append(m & movable)
        return masks

    def project(self, x, free=None, iters: int = 500) -> np.ndarray:
        """Euclidean projection onto the box and linear constraints.

        Coordinates outside ``free`` are pinned at the query. Dykstra's
        alternating projections are used when linear constraints are present.
        """
        x = np.array(x, dtype=float).reshape(-1)
        lo, hi = self.lower.copy(), self.upper.copy()
        if free is not None:
            lo[~free] = self.query[~free]
            hi[~free] = self.query[~free]
        x = np.clip(x, lo, hi)
        if self.A is None or np.all(self.A @ x <= self.b + 1e-14):
            return x
        A = self.A if free is None else self.A * free
        sets = 1 + A.shape[0]
        incs = np.zeros((sets, x.size))
        for _ in range(iters):
            x_prev = x.copy()
            y = x + incs[0]
            x_new = np.clip(y, lo, hi)
            incs[0] = y - x_new
            x = x_new
            for i in range(A.shape[0]):
                a = A[i]
                nrm = a @ a
                y = x + incs[i + 1]
                # frozen coordinates still count towards the row, but only free ones move
                viol = self.A[i] @ y - self.b[i]
                x_new = y - (viol / nrm) * a if viol > 0.0 and nrm > 0.0 else y
                incs[i + 1] = y - x_new
                x = x_new
            if np.max(np.abs(x - x_prev)) < 1e-14:
                break
        return np.clip(x, lo, hi)

    def project_rows(self, X, free=None) -> np.ndarray:
        """:meth:`project` applied to each row of ``X``; vectorised for box-only problems."""
        if self.A is None:
            lo, hi = self.lower, self.upper
            if free is not None:
                lo = np.where(free, lo, self.query)
                hi = np.where(free, hi, self.query)
            return np.clip(X, lo, hi)
        return np.array([self.project(x, free) for x in X])

    def finalize(self, x, free=None) -> np.ndarray:
        """Map a relaxed candidate to a point that satisfies every constraint exactly."""
        x = self.project(x, free)
        if free is not None:
            x[~free] = self.query[~free]
        if not self.integer_dims:
            return x
        idx = [j for j in self.integer_dims if free is None or free[j]]
        base = x.copy()
        x[list(self.integer_dims)] = np.round(x[list(self.integer_dims)])
        if self.A is None or np.all(self.A @ x <= self.b + FEAS_TOL) or not idx or len(idx) > 10:
            return x
        best, best_d = None, math.inf
        for combo in itertools.product((math.floor, math.ceil), repeat=len(idx)):
            cand = x.copy()
            for j, fn in zip(idx, combo):
                cand[j] = min(max(fn(base[j]), self.lower[j]), self.upper[j])
            if np.all(self.A @ cand <= self.b + FEAS_TOL):
                dist = float(np.sum((cand - base) ** 2))
                if dist < best_d:
                    best, best_d = cand, dist
        return x if best is None else best

    def sample(self, rng: np.random.Generator, n: int, lhs: bool = False) -> np.ndarray:
        """``n`` feasible points, uniform over random l0-admissible coordinate subsets."""
        d = self.dim
        out = np.empty((n, d))
        if lhs:
            U = qmc.LatinHypercube(d=d, seed=rng).random(n)
        else:
            U = rng.uniform(size=(n, d))
        masks = self.subsets(rng)
        for i in range(n):
            free = masks[int(rng.integers(len(masks)))] if len(masks) > 1 else masks[0]
            x = self.query.copy()
            x[free] = self.lower[free] + U[i, free] * self.width[free]
            if self.A is not None:
                for _ in range(200):
                    if np.all(self.A @ x <= self.b):
                        break
                    x[free] = self.lower[free] + rng.uniform(size=int(free.sum())) * self.width[free]
            out[i] = self.finalize(x, free)
        return out


@dataclass
class TraceRecord:
    iteration: int
    x: list
    f: float
    rho: float
    incumbent: float
    acquisition: Optional[float] = None
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, timing: bool = False) -> dict:
        d = {"iteration": self.iteration, "x": self.x, "f": self.f, "rho": self.rho,
             "incumbent": self.incumbent, "acquisition": self.acquisition}
        if timing:
            d["wall_time"] = self.wall_time
        return d


@dataclass
class Trace:
    strategy: str
    potential: PotentialSpec
    budget: int
    seed: int
    records: list = field(default_factory=list)
    epsilon: float = 0.05
    rho_star: Optional[float] = None
    rho_star_source: str = "observed"
    converged: bool = True

    def __len__(self):
        return len(self.records)

    @property
    def incumbents(self) -> np.ndarray:
        return np.array([r.incumbent for r in self.records])

    @property
    def best(self) -> TraceRecord:
        # first record attaining the maximum
        return max(self.records, key=lambda r: (r.rho, -r.iteration))

    @property
    def rho_star_estimated(self) -> bool:
        return self.rho_star_source != "given"

    @property
    def reference_rho_star(self) -> float:
        return self.rho_star if self.rho_star is not None else self.best.rho

    @property
    def in_target(self) -> bool:
        ref = self.reference_rho_star
        return ref > 0.0 and self.best.rho >= (1.0 - self.epsilon) * ref

    @property
    def target_reached(self) -> bool:
        """Best potential within (1 - eps) of the oracle value, or of 1/e without one."""
        ref = self.rho_star if self.rho_star is not None else INV_E
        return self.best.rho >= (1.0 - self.epsilon) * ref

    @property
    def budget_exhausted(self) -> bool:
        return len(self.records) >= self.budget and not self.target_reached

    def incumbent_at(self, n: int) -> float:
        return self.records[min(n, len(self.records)) - 1].incumbent

    def to_jsonl(self, fh, timing: bool = False) -> None:
        for r in self.records:
            fh.write(json.dumps(r.to_dict(timing), sort_keys=True) + "\n")

    def summary(self) -> dict:
        b = self.best
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "potential": self.potential.to_dict(),
            "evaluations": len(self.records),
            "best_x": b.x,
            "best_f": b.f,
            "best_rho": b.rho,
            "terminal_incumbent": self.records[-1].incumbent,
            "rho_star": self.reference_rho_star,
            "rho_star_source": self.rho_star_source,
            "rho_star_estimated": self.rho_star_estimated,
            "epsilon": self.epsilon,
            "in_target": self.in_target,
            "budget_exhausted": self.budget_exhausted,
        }


def _record(trace: Trace, x, fx: float, acq, t0: float) -> None:
    rho = float(ep_value(trace.potential, fx))
    prev = trace.records[-1].incumbent if trace.records else 0.0
    trace.records.append(TraceRecord(len(trace.records), [float(v) for v in x], float(fx), rho,
                                     max(prev, rho), None if acq is None else float(acq),
                                     time.perf_counter() - t0))


def initial_design(problem: SearchProblem, n: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded Latin-hypercube design mapped into the feasible region."""
    return problem.sample(rng, n, lhs=True)


def fit_surrogate(X, y, problem: SearchProblem, rng: np.random.Generator,
                  hyperopt: bool = True, kernel=None) -> GpPosterior:
    data = SampleSet(X, y)
    rng_range = np.where(problem.width > 0.0, problem.width, 1.0)
    if kernel is None:
        kernel = fit_hyperparameters(data, rng_range, rng) if hyperopt else None
    if kernel is None:
        from .surrogate import KernelParams

        kernel = KernelParams(0.3 * rng_range, 1.0)
    try:
        return fit(data, kernel, standardize=True)
    except CholeskyError:
        from dataclasses import replace

        return fit(data, replace(kernel, lengthscale=kernel.lengthscale * 0.5), standardize=True)


@dataclass
class AcquisitionMax:
    x: np.ndarray
    value: float
    converged: bool
    candidates: list = field(default_factory=list, repr=False)


def _ascend(fun, X, problem: SearchProblem, free: np.ndarray, iters: int):
    """Batched normalised projected-gradient ascent with per-start step control."""
    width = np.where(free, problem.width, 0.0)
    val, grad = fun(X)
    step = np.full(X.shape[0], 0.1)
    converged = np.zeros(X.shape[0], dtype=bool)
    for _ in range(iters):
        g = grad * width
        norm = np.linalg.norm(g, axis=1)
        active = (norm > 0.0) & (step > 1e-7) & np.isfinite(norm)
        converged |= ~active
        if not active.any():
            break
        direction = np.zeros_like(g)
        direction[active] = g[active] / norm[active, None]
        Xn = X + step[:, None] * direction * width
        Xn = np.where(active[:, None], problem.project_rows(Xn, free), X)
        vn, gn = fun(Xn)
        better = active & (vn > val)
        X = np.where(better[:, None], Xn, X)
        val = np.where(better, vn, val)
        grad = np.where(better[:, None], gn, grad)
        step = np.where(better, np.minimum(step * 1.5, 0.5), np.where(active, step * 0.5, step))
    return X, val, converged


def _maximize(fun, problem: SearchProblem, rng: np.random.Generator, extra_starts=(),
              existing: np.ndarray | None = None) -> AcquisitionMax:
    candidates = []
    all_conv = True
    for free in problem.subsets(rng):
        starts = []
        U = qmc.LatinHypercube(d=problem.dim, seed=rng).random(N_STARTS)
        for u in U:
            x = problem.query.copy()
            x[free] = problem.lower[free] + u[free] * problem.width[free]
            starts.append(problem.project(x, free))
        for x in extra_starts:
            x = np.array(x, dtype=float)
            x[~free] = problem.query[~free]
            starts.append(problem.project(x, free))
        X, val, conv = _ascend(fun, np.array(starts), problem, free, ASCENT_ITERS)
        all_conv &= bool(conv.all())
        for x, v in zip(X, val):
            candidates.append((float(v), x, free))
    # highest value first; stable sort keeps the lowest start index on ties
    order = sorted(range(len(candidates)), key=lambda i: -candidates[i][0])
    ranked = [candidates[i] for i in order]
    for v, x, free in ranked:
        xf = problem.finalize(x, free)
        if existing is None or len(existing) == 0 or \
                np.min(np.max(np.abs(existing - xf), axis=1)) > DEDUP_TOL:
            return AcquisitionMax(xf, v, all_conv, ranked)
    # every candidate duplicates an existing sample: fall back to a fresh random point
    for _ in range(100):
        xf = problem.sample(rng, 1)[0]
        if np.min(np.max(np.abs(existing - xf), axis=1)) > DEDUP_TOL:
            return AcquisitionMax(xf, 0.0, all_conv, ranked)
    v, x, free = ranked[0]
    return AcquisitionMax(problem.finalize(x, free), v, all_conv, ranked)


def optimize_acquisition(posterior: GpPosterior, potential: PotentialSpec, incumbent: float,
                         problem: SearchProblem, seed, extra_starts=(),
                         existing: np.ndarray | None = None) -> AcquisitionMax:
    """Multi-start maximisation of EI-CFX over the constrained domain.

    Starts are 32 Latin-hypercube points per admissible coordinate subset plus
    ``extra_starts`` (typically the incumbent point).
    """
    inputs = AcquisitionInputs(posterior, potential, incumbent)
    fun = lambda X: ei_cfx_value_and_grad(inputs, X)  # noqa: E731
    return _maximize(fun, problem, make_rng(seed), extra_starts, existing)


def _finish(trace: Trace, rho_star) -> Trace:
    """Attach the reference optimum: a number (given), ``("grid", value)`` or None (observed)."""
    if isinstance(rho_star, tuple):
        trace.rho_star_source, trace.rho_star = rho_star[0], float(rho_star[1])
    elif rho_star is not None:
        trace.rho_star_source, trace.rho_star = "given", float(rho_star)
    return trace


def _check_budget(budget: int, n_init: int) -> None:
    if budget < n_init:
        raise ValueError(f"budget {budget} is below the initial design size {n_init}")


def run_multi_cfx(problem: SearchProblem, potentials: Sequence[PotentialSpec], budget: int, seed,
                  n_init: int = N_INIT, epsilon: float = 0.05, rho_star=None,
                  hyperopt: bool = True, kernel=None) -> list[Trace]:
    """Bayes-CFX for several potentials over one shared sample set.

    Each iteration fits one GP to ``f``, maximises EI-CFX for every potential
    and evaluates the de-duplicated union of proposals. ``budget`` caps the
    total number of model evaluations.
    """
    if not potentials:
        raise ValueError("need at least one potential")
    _check_budget(budget, n_init)
    problem.check_feasible()
    rng = make_rng(seed)
    t0 = time.perf_counter()
    stars = rho_star if isinstance(rho_star, list) else [rho_star] * len(potentials)
    traces = [Trace("bayes-cfx", p, budget, int(seed) if not isinstance(seed, np.random.Generator) else 0,
                    epsilon=epsilon) for p in potentials]
    X = initial_design(problem, n_init, rng)
    y = np.array([problem.evaluate(x) for x in X])
    for x, fx in zip(X, y):
        for tr in traces:
            _record(tr, x, fx, None, t0)
    while len(y) < budget:
        post = fit_surrogate(X, y, problem, rng, hyperopt, kernel)
        proposals = []
        for tr in traces:
            inc = tr.records[-1].incumbent
            best_x = np.array(tr.best.x)
            res = optimize_acquisition(post, tr.potential, inc, problem, rng, [best_x],
                                       existing=np.vstack([X] + [p[0][None] for p in proposals])
                                       if proposals else X)
            tr.converged &= res.converged
            proposals.append((res.x, res.value))
        for k, (x, acq) in enumerate(proposals):
            if len(y) >= budget:
                break
            fx = problem.evaluate(x)
            X = np.vstack([X, x])
            y = np.append(y, fx)
            for j, tr in enumerate(traces):
                _record(tr, x, fx, acq if j == k else None, t0)
    return [_finish(tr, s) for tr, s in zip(traces, stars)]


def run_bayes_cfx(problem: SearchProblem, potential: PotentialSpec, budget: int, seed, **kw) -> Trace:
    """Bayesian optimisation of ``rho(f(x))`` with the GP over ``f`` and EI-CFX."""
    return run_multi_cfx(problem, [potential], budget, seed, **kw)[0]


def run_bayes_naive(problem: SearchProblem, potential: PotentialSpec, budget: int, seed,
                    n_init: int = N_INIT, epsilon: float = 0.05, rho_star=None,
                    hyperopt: bool = True, kernel=None) -> Trace:
    """Baseline: GP over the composite ``rho(f(x))`` with standard expected improvement."""
    _check_budget(budget, n_init)
    problem.check_feasible()
    rng = make_rng(seed)
    t0 = time.perf_counter()
    trace = Trace("bayes-naive", potential, budget, int(seed), epsilon=epsilon)
    X = initial_design(problem, n_init, rng)
    for x in X:
        _record(trace, x, problem.evaluate(x), None, t0)
    while len(trace) < budget:
        rho = np.array([r.rho for r in trace.records])
        post = fit_surrogate(X, rho, problem, rng, hyperopt, kernel)
        inc = float(rho.max())
        fun = lambda Z: ei_naive_value_and_grad(post, inc, Z)  # noqa: E731
        res = _maximize(fun, problem, rng, [np.array(trace.best.x)], existing=X)
        trace.converged &= res.converged
        X = np.vstack([X, res.x])
        _record(trace, res.x, problem.evaluate(res.x), res.value, t0)
    return _finish(trace, rho_star)


def run_random(problem: SearchProblem, potential: PotentialSpec, budget: int, seed,
               epsilon: float = 0.05, rho_star=None) -> Trace:
    """Baseline: i.i.d. uniform samples over the feasible region."""
    problem.check_feasible()
    rng = make_rng(seed)
    t0 = time.perf_counter()
    trace = Trace("random", potential, budget, int(seed), epsilon=epsilon)
    for x in problem.sample(rng, budget):
        _record(trace, x, problem.evaluate(x), None, t0)
    return _finish(trace, rho_star)


# ---------------------------------------------------------------------------
# Local search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalOptParams:
    step: float = 0.1
    tol: float = 1e-6
    max_iters: int = 1000

    def __post_init__(self):
        if not (self.step > 0.0 and self.tol > 0.0 and self.max_iters >= 1):
            raise ValueError("step and tol must be positive, max_iters >= 1")


@dataclass
class LocalOptResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual: float
    path: list = field(default_factory=list, repr=False)


def _potential_gradient(problem: SearchProblem, potential: PotentialSpec, x: np.ndarray,
                        fd_step: float = 1e-6) -> tuple[float, np.ndarray]:
    fx = problem.evaluate(x)
    if problem.model_grad is not None:
        gf = np.asarray(problem.model_grad(x), dtype=float)
    else:
        gf = np.empty(x.size)
        for j in range(x.size):
            h = fd_step * max(1.0, abs(x[j]))
            e = np.zeros(x.size)
            e[j] = h
            gf[j] = (problem.evaluate(x + e) - problem.evaluate(x - e)) / (2.0 * h)
    return fx, float(ep_derivative(potential, fx)) * gf


def localopt_residual(problem: SearchProblem, potential: PotentialSpec, c, step: float) -> float:
    """``|| c - P[c + step * grad rho(f(c))] ||_2``."""
    c = np.asarray(c, dtype=float)
    _, g = _potential_gradient(problem, potential, c)
    return float(np.linalg.norm(c - problem.project(c + step * g)))


def projected_gradient_search(problem: SearchProblem, potential: PotentialSpec, x0,
                              params: LocalOptParams = LocalOptParams()) -> LocalOptResult:
    """Iterate ``x <- P[x + step * grad rho(f(x))]`` until the move is at most ``tol``.

    ``P`` is the Euclidean projection onto the box and linear constraints.
    Integer and l0 constraints are not part of this recurrence.
    """
    x = problem.project(np.asarray(x0, dtype=float))
    path = [x.copy()]
    for it in range(params.max_iters):
        _, g = _potential_gradient(problem, potential, x)
        x_new = problem.project(x + params.step * g)
        res = float(np.linalg.norm(x - x_new))
        if res <= params.tol:
            return LocalOptResult(x, True, it, res, path)
        x = x_new
        path.append(x.copy())
    _, g = _potential_gradient(problem, potential, x)
    res = float(np.linalg.norm(x - problem.project(x + params.step * g)))
    return LocalOptResult(x, res <= params.tol, params.max_iters, res, path)


def run_localopt(problem: SearchProblem, potential: PotentialSpec, budget: int, seed,
                 params: LocalOptParams = LocalOptParams(max_iters=200), epsilon: float = 0.05,
                 rho_star=None) -> Trace:
    """Projected-gradient search from random feasible starts, one trace record per iterate.

    Restarts from a fresh random point whenever a run converges. Finite
    difference gradient evaluations are not charged to ``budget``.
    """
    problem.check_feasible()
    rng = make_rng(seed)
    t0 = time.perf_counter()
    trace = Trace("localopt", potential, budget, int(seed), epsilon=epsilon)
    converged_all = True
    while len(trace) < budget:
        x0 = problem.sample(rng, 1)[0]
        remaining = budget - len(trace)
        res = projected_gradient_search(problem, potential, x0,
                                        LocalOptParams(params.step, params.tol,
                                                       min(params.max_iters, remaining)))
        for x in res.path[:remaining]:
            xf = problem.finalize(x)
            _record(trace, xf, problem.evaluate(xf), None, t0)
        converged_all &= res.converged
    trace.converged = converged_all
    return _finish(trace, rho_star)


def grid_rho_star(problem: SearchProblem, potential: PotentialSpec, n: int = 100_000) -> float:
    """Best potential on a regular grid (1-D) or uniform sample (d > 1) of the box."""
    if problem.dim == 1:
        xs = np.linspace(problem.lower[0], problem.upper[0], n)[:, None]
    else:
        xs = problem.sample(make_rng(12345), n)
    ys = np.array([problem.evaluate(x) for x in xs])
    return float(np.max(ep_value(potential, ys)))
