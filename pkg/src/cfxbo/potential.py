"""Exponential-polynomial counterfactual potentials.

A potential scores a model output ``y`` relative to the query output
``f(q)``. With ``z = (y - f(q)) / w`` the EP family is ``z**2 * exp(-z**2)``
rectified to one side (AEP+ / AEP-) or summed over both sides (SEP). Every
member is zero at the query output and peaks at ``exp(-1)`` when
``|y - f(q)| = w``.

Superlevel sets of ``z**2 exp(-z**2)`` are bounded by the two real Lambert W
branches: ``|z| = sqrt(-W_k(-level))`` for ``k in {0, -1}``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import AEP_MINUS, AEP_PLUS, INV_E, SEP, lambert_w_scalar

__all__ = [
    "INV_E",
    "Branch",
    "PotentialKind",
    "PotentialSpec",
    "SuperlevelSet",
    "lambert_w",
    "ep_value",
    "ep_derivative",
    "superlevel_roots",
    "target_membership",
]

# levels below this are treated as the 0-superlevel set
TINY_LEVEL = 1e-300


class Branch(enum.IntEnum):
    K0 = 0
    KM1 = -1


class PotentialKind(enum.Enum):
    AEP_PLUS = "AEP_PLUS"
    AEP_MINUS = "AEP_MINUS"
    SEP = "SEP"

    @property
    def code(self) -> int:
        return {"AEP_PLUS": AEP_PLUS, "AEP_MINUS": AEP_MINUS, "SEP": SEP}[self.value]

    @classmethod
    def parse(cls, value) -> "PotentialKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("_", "").replace(" ", "")
        aliases = {"AEPPLUS": "AEP_PLUS", "AEP+": "AEP_PLUS",
                   "AEPMINUS": "AEP_MINUS", "AEP-": "AEP_MINUS", "SEP": "SEP"}
        if key not in aliases:
            raise ValueError(f"unknown potential kind {value!r}")
        return cls(aliases[key])


@dataclass(frozen=True)
class PotentialSpec:
    """EP potential centred at the query output ``center`` with width ``width``."""

    kind: PotentialKind
    center: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind.parse(self.kind))
        if not (self.width > 0.0 and math.isfinite(self.width)):
            raise ValueError(f"width must be positive and finite, got {self.width}")
        if not math.isfinite(self.center):
            raise ValueError("center must be finite")

    @classmethod
    def from_target(cls, kind, center: float, target: float) -> "PotentialSpec":
        """Width chosen so the potential peaks at ``target`` (e.g. ``f(q) - w = 0.5``)."""
        kind = PotentialKind.parse(kind)
        if (kind is PotentialKind.AEP_PLUS and target < center) or \
                (kind is PotentialKind.AEP_MINUS and target > center):
            raise ValueError(f"{kind.value} cannot peak at {target} from center {center}")
        return cls(kind, center, abs(center - target))

    def __call__(self, y):
        return ep_value(self, y)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "center": self.center, "width": self.width}


@dataclass(frozen=True)
class SuperlevelSet:
    """Sorted, disjoint closed intervals in output (y) units."""

    intervals: tuple[tuple[float, float], ...]
    level: float

    def contains(self, y: float) -> bool:
        return any(lo <= y <= hi for lo, hi in self.intervals)


def lambert_w(branch, c: float) -> float:
    """Real Lambert W, ``w * exp(w) = c``.

    Parameters
    ----------
    branch : Branch or int
        ``0`` (principal, ``w >= -1``) or ``-1`` (``w <= -1``).
    c : float
        Argument; ``c >= -1/e`` for branch 0, ``-1/e <= c < 0`` for branch -1.

    Raises
    ------
    ValueError
        If ``c`` is outside the real range of the branch.
    """
    k = int(Branch(branch))
    w = lambert_w_scalar(float(c), k)
    if math.isnan(w):
        raise ValueError(f"lambert_w: c={c!r} outside the real domain of branch {k}")
    return w


# beyond |z| = 40 both z^2 exp(-z^2) and its derivative are exactly 0.0 in doubles
Z_CLIP = 40.0


def _rectified_z(spec: PotentialSpec, y) -> np.ndarray:
    z = np.clip((np.asarray(y, dtype=float) - spec.center) / spec.width, -Z_CLIP, Z_CLIP)
    if spec.kind is PotentialKind.AEP_PLUS:
        return np.maximum(z, 0.0)
    if spec.kind is PotentialKind.AEP_MINUS:
        return np.minimum(z, 0.0)
    return z


def ep_value(spec: PotentialSpec, y):
    """Potential value at output(s) ``y``; accepts scalars or arrays."""
    z = _rectified_z(spec, y)
    z2 = z * z
    out = z2 * np.exp(-z2)
    return float(out) if out.ndim == 0 else out


def ep_derivative(spec: PotentialSpec, y):
    """d rho / d y."""
    z = _rectified_z(spec, y)
    z2 = z * z
    out = 2.0 * z * (1.0 - z2) * np.exp(-z2) / spec.width
    return float(out) if out.ndim == 0 else out


def unit_roots(level: float) -> tuple[float, float]:
    """Roots ``0 < r0 <= 1 <= r1`` of ``r**2 exp(-r**2) = level`` (``r1`` may be inf)."""
    if not (0.0 <= level <= INV_E * (1.0 + 1e-15)):
        raise ValueError(f"level must lie in (0, 1/e], got {level!r}")
    if level < TINY_LEVEL:
        return 0.0, math.inf
    level = min(level, INV_E)
    w0 = lambert_w_scalar(-level, 0)
    wm1 = lambert_w_scalar(-level, -1)
    r0 = math.sqrt(max(-w0, 0.0))
    r1 = math.sqrt(max(-wm1, 0.0))
    return min(r0, 1.0), max(r1, 1.0)


def superlevel_roots(spec: PotentialSpec, level: float) -> SuperlevelSet:
    """Output intervals on which ``ep_value(spec, y) >= level``.

    Raises
    ------
    ValueError
        If ``level`` is outside ``(0, 1/e]``.
    """
    if not level > 0.0:
        raise ValueError(f"level must lie in (0, 1/e], got {level!r}")
    r0, r1 = unit_roots(level)
    c, w = spec.center, spec.width
    pos = (c + w * r0, c + w * r1)
    neg = (c - w * r1, c - w * r0)
    if spec.kind is PotentialKind.AEP_PLUS:
        intervals = (pos,)
    elif spec.kind is PotentialKind.AEP_MINUS:
        intervals = (neg,)
    else:
        intervals = (neg, pos)
    return SuperlevelSet(intervals, level)


def target_membership(spec: PotentialSpec, rho_star: float, eps: float, y: float) -> bool:
    """Membership circuit for the eps-optimal target set ``rho(y) >= (1 - eps) rho_star``."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    if not 0.0 < rho_star <= INV_E * (1.0 + 1e-15):
        raise ValueError("rho_star must lie in (0, 1/e]")
    return bool(ep_value(spec, y) >= (1.0 - eps) * rho_star)
