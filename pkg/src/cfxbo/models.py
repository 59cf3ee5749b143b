"""Model adapters and tabular preprocessing.

Models map a point (1-D array) to a scalar. ``LogisticModel`` is smooth
and exposes an analytic gradient; ``StepEnsembleModel`` is a sum of
axis-aligned steps, piecewise constant and so useless to gradient methods,
standing in for a boosted tree ensemble.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "LinearModel",
    "LogisticModel",
    "StepRule",
    "StepEnsembleModel",
    "logistic_predict",
    "step_ensemble_predict",
    "load_model",
    "model_from_dict",
    "ColumnSpec",
    "TabularDataset",
    "load_schema",
    "load_dataset",
    "encode_row",
    "decode_row",
    "DatasetError",
]


def _point(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != dim:
        raise ValueError(f"expected a point of dimension {dim}, got {x.size}")
    return x


@dataclass(frozen=True)
class LinearModel:
    """``w @ x + b``; handy for synthetic checks with a known optimum."""

    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).reshape(-1))

    @property
    def dim(self) -> int:
        return self.weights.size

    def __call__(self, x) -> float:
        return float(self.weights @ _point(x, self.dim)) + self.bias

    def gradient(self, x) -> np.ndarray:
        return self.weights.copy()

    def to_dict(self) -> dict:
        return {"type": "linear", "weights": self.weights.tolist(), "bias": self.bias}


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).reshape(-1))

    @property
    def dim(self) -> int:
        return self.weights.size

    def __call__(self, x) -> float:
        return logistic_predict(self, x)

    def gradient(self, x) -> np.ndarray:
        p = logistic_predict(self, x)
        return p * (1.0 - p) * self.weights

    def to_dict(self) -> dict:
        return {"type": "logistic", "weights": self.weights.tolist(), "bias": self.bias}


def logistic_predict(model: LogisticModel, x) -> float:
    t = float(model.weights @ _point(x, model.dim)) + model.bias
    # numerically stable sigmoid
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@dataclass(frozen=True)
class StepRule:
    dim: int
    threshold: float
    value: float


@dataclass(frozen=True)
class StepEnsembleModel:
    n_features: int
    rules: tuple[StepRule, ...] = ()
    base: float = 0.0

    def __post_init__(self):
        rules = tuple(r if isinstance(r, StepRule) else StepRule(int(r["dim"]), float(r["threshold"]),
                                                                 float(r["value"]))
                      for r in self.rules)
        for r in rules:
            if not 0 <= r.dim < self.n_features:
                raise ValueError(f"rule dimension {r.dim} out of range")
        object.__setattr__(self, "rules", rules)

    @property
    def dim(self) -> int:
        return self.n_features

    def __call__(self, x) -> float:
        return step_ensemble_predict(self, x)

    def to_dict(self) -> dict:
        return {"type": "step_ensemble", "n_features": self.n_features, "base": self.base,
                "rules": [{"dim": r.dim, "threshold": r.threshold, "value": r.value} for r in self.rules]}

    @classmethod
    def random(cls, n_features: int, n_rules: int, rng: np.random.Generator, lo=-1.0, hi=1.0,
               scale: float = 1.0) -> "StepEnsembleModel":
        rules = [StepRule(int(rng.integers(n_features)), float(rng.uniform(lo, hi)),
                          float(rng.normal(scale=scale))) for _ in range(n_rules)]
        return cls(n_features, tuple(rules), 0.0)

    @classmethod
    def fit(cls, X, y, n_rules: int = 100, learning_rate: float = 0.3,
            n_thresholds: int = 32) -> "StepEnsembleModel":
        """Least-squares gradient boosting with depth-one trees (stumps).

        Each round fits the stump that most reduces the squared residual,
        with thresholds taken from per-feature quantiles of ``X``.
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        n, d = X.shape
        base = float(y.mean())
        resid = y - base
        qs = np.linspace(0.0, 1.0, n_thresholds + 2)[1:-1]
        cands = [np.unique(np.quantile(X[:, j], qs)) for j in range(d)]
        masks = [X[:, j][:, None] >= t[None, :] for j, t in enumerate(cands)]
        rules = []
        for _ in range(n_rules):
            best = None
            total = resid.sum()
            for j in range(d):
                m = masks[j]
                n_hi = m.sum(axis=0)
                ok = (n_hi > 0) & (n_hi < n)
                s_hi = resid @ m
                s_lo = total - s_hi
                # SSE reduction of a two-leaf fit
                gain = np.where(ok, s_hi ** 2 / np.maximum(n_hi, 1) + s_lo ** 2 / np.maximum(n - n_hi, 1), -np.inf)
                k = int(np.argmax(gain))
                if best is None or gain[k] > best[0]:
                    best = (gain[k], j, k, s_lo[k] / (n - n_hi[k]), s_hi[k] / n_hi[k])
            if best is None or not np.isfinite(best[0]):
                break
            _, j, k, lo_val, hi_val = best
            base += learning_rate * lo_val
            rules.append(StepRule(j, float(cands[j][k]), float(learning_rate * (hi_val - lo_val))))
            resid -= learning_rate * np.where(masks[j][:, k], hi_val, lo_val)
        return cls(d, tuple(rules), base)


def step_ensemble_predict(model: StepEnsembleModel, x) -> float:
    x = _point(x, model.n_features)
    out = model.base
    for r in model.rules:
        if x[r.dim] >= r.threshold:
            out += r.value
    return float(out)


def model_from_dict(spec: dict):
    kind = spec.get("type")
    if kind == "linear":
        return LinearModel(np.asarray(spec["weights"], dtype=float), float(spec.get("bias", 0.0)))
    if kind == "logistic":
        return LogisticModel(np.asarray(spec["weights"], dtype=float), float(spec.get("bias", 0.0)))
    if kind == "step_ensemble":
        rules = spec.get("rules", [])
        n = spec.get("n_features")
        if n is None:
            n = 1 + max((int(r["dim"]) for r in rules), default=0)
        return StepEnsembleModel(int(n), tuple(rules), float(spec.get("base", 0.0)))
    raise ValueError(f"unknown model type {kind!r}")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Tabular data
# ---------------------------------------------------------------------------


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str  # numeric | ordinal | categorical
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("numeric", "ordinal", "categorical"):
            raise DatasetError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind != "numeric" and not self.categories:
            raise DatasetError(f"column {self.name!r}: {self.kind} columns need declared categories")


def load_schema(path_or_dict) -> list[ColumnSpec]:
    """Schema JSON: ``{"columns": [{"name", "kind", "categories"?}, ...]}``."""
    if isinstance(path_or_dict, (str, Path)):
        with open(path_or_dict) as fh:
            spec = json.load(fh)
    else:
        spec = path_or_dict
    return [ColumnSpec(c["name"], c["kind"], tuple(str(v) for v in c.get("categories", ())))
            for c in spec["columns"]]


@dataclass
class TabularDataset:
    columns: list[ColumnSpec]
    rows: list[dict]
    means: dict = field(default_factory=dict)
    stds: dict = field(default_factory=dict)

    @property
    def feature_names(self) -> list[str]:
        names = []
        for c in self.columns:
            if c.kind == "categorical":
                names.extend(f"{c.name}={v}" for v in c.categories)
            else:
                names.append(c.name)
        return names

    def matrix(self) -> np.ndarray:
        return np.array([encode_row(self, r) for r in self.rows], dtype=float)


def _parse_numeric(col: ColumnSpec, raw) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise DatasetError(f"column {col.name!r}: non-numeric value {raw!r}") from None


def load_dataset(path, schema) -> TabularDataset:
    """Read a CSV whose header contains every schema column and fit the transforms.

    Numeric columns are standardised (zero-variance columns use std 1),
    ordinal columns are coded by position in the declared order and
    categorical columns are one-hot encoded.
    """
    columns = schema if isinstance(schema, list) else load_schema(schema)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c.name for c in columns if c.name not in header]
        if missing:
            raise DatasetError(f"missing columns: {missing}")
        rows = []
        for raw in reader:
            row = {}
            for c in columns:
                v = raw[c.name]
                if c.kind == "numeric":
                    row[c.name] = _parse_numeric(c, v)
                else:
                    if v not in c.categories:
                        raise DatasetError(f"column {c.name!r}: unknown category {v!r}")
                    row[c.name] = v
            rows.append(row)
    ds = TabularDataset(columns, rows)
    for c in columns:
        if c.kind == "numeric":
            vals = np.array([r[c.name] for r in rows], dtype=float)
            mean = float(vals.mean()) if vals.size else 0.0
            std = float(vals.std()) if vals.size else 0.0
            ds.means[c.name] = mean
            ds.stds[c.name] = std if std > 0.0 else 1.0
    return ds


def encode_row(ds: TabularDataset, row: dict) -> np.ndarray:
    out: list[float] = []
    for c in ds.columns:
        if c.name not in row:
            raise DatasetError(f"missing column {c.name!r}")
        v = row[c.name]
        if c.kind == "numeric":
            out.append((_parse_numeric(c, v) - ds.means[c.name]) / ds.stds[c.name])
        elif c.kind == "ordinal":
            if str(v) not in c.categories:
                raise DatasetError(f"column {c.name!r}: unknown category {v!r}")
            out.append(float(c.categories.index(str(v))))
        else:
            if str(v) not in c.categories:
                raise DatasetError(f"column {c.name!r}: unknown category {v!r}")
            out.extend(1.0 if str(v) == cat else 0.0 for cat in c.categories)
    return np.array(out)


def decode_row(ds: TabularDataset, vec) -> dict:
    """Inverse of :func:`encode_row`; ordinal codes are rounded, one-hot blocks take the argmax."""
    vec = np.asarray(vec, dtype=float)
    row: dict = {}
    i = 0
    for c in ds.columns:
        if c.kind == "numeric":
            row[c.name] = float(vec[i] * ds.stds[c.name] + ds.means[c.name])
            i += 1
        elif c.kind == "ordinal":
            k = int(np.clip(np.rint(vec[i]), 0, len(c.categories) - 1))
            row[c.name] = c.categories[k]
            i += 1
        else:
            k = len(c.categories)
            row[c.name] = c.categories[int(np.argmax(vec[i:i + k]))]
            i += k
    if i != vec.size:
        raise DatasetError(f"encoded vector has length {vec.size}, schema expects {i}")
    return row
