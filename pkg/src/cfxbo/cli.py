"""Command-line entry point: ``cfxbo run | quadrature | validate``.

Exit codes: 0 ok, 2 configuration error, 3 infeasible constraints,
4 validation failure. ``CFXBO_OUTPUT_DIR`` overrides the output directory of
``run``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import search
from .models import DatasetError, load_dataset, load_model, load_schema, model_from_dict
from .potential import PotentialKind, PotentialSpec
from .quadrature import gauss_hermite, gauss_legendre, write_rule_csv
from .search import InfeasibleError, LocalOptParams, SearchProblem

log = logging.getLogger("cfxbo")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_VALIDATION = 4

OUTPUT_ENV = "CFXBO_OUTPUT_DIR"
STRATEGIES = ("bayes-cfx", "bayes-naive", "random", "localopt")
BO_STRATEGIES = ("bayes-cfx", "bayes-naive")
SIGN_WORDS = {"increase": 1, "up": 1, "+": 1, "decrease": -1, "down": -1, "-": -1, "free": 0}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: object
    query: np.ndarray
    bounds: np.ndarray
    potentials: list
    strategy: str
    budget: int
    seeds: list
    epsilon: float = 0.05
    l0_bounds: list = field(default_factory=lambda: [None])
    sign: tuple | None = None
    integer_dims: tuple = ()
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    feature_names: list = field(default_factory=list)
    rho_star: object = None
    hyperopt: bool = True
    timing: bool = False
    localopt: LocalOptParams = field(default_factory=lambda: LocalOptParams(max_iters=200))
    output_dir: Path = Path("cfxbo_out")

    def problem(self, l0_bound) -> SearchProblem:
        grad = getattr(self.model, "gradient", None)
        return SearchProblem(self.model, self.query, self.bounds, self.A, self.b, self.integer_dims,
                             l0_bound, self.sign, grad, self.feature_names)


def _read_file(path: Path):
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    with open(path) as fh:
        try:
            return yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None


def _resolve(base: Path, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _potential(spec: dict, center: float) -> PotentialSpec:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("potential needs a 'kind'")
    try:
        kind = PotentialKind.parse(spec["kind"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if "width" in spec and "target" in spec:
        raise ConfigError("potential takes either 'width' or 'target', not both")
    try:
        if "target" in spec:
            return PotentialSpec.from_target(kind, center, float(spec["target"]))
        if "width" in spec:
            return PotentialSpec(kind, center, float(spec["width"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad potential: {exc}") from None
    raise ConfigError("potential needs 'width' or 'target'")


def _select_query(rule: dict, model, candidates: np.ndarray, lo, hi) -> np.ndarray:
    """First candidate strictly inside the box whose model output reaches ``min_output``."""
    threshold = float(rule.get("min_output", 0.9))
    for x in candidates:
        if np.all(x > lo) and np.all(x < hi) and model(x) >= threshold:
            return x
    raise ConfigError(f"no candidate query reaches model output {threshold}")


def parse_config(raw: dict, base: Path = Path(".")) -> RunConfig:
    """Validate a decoded config mapping and build a :class:`RunConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    known = {"model", "dataset", "schema", "query", "query_rule", "bounds", "potential", "constraints",
             "strategy", "budget", "seeds", "epsilon", "rho_star", "hyperopt", "timing", "localopt",
             "output_dir", "feature_names"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        if "model" not in raw:
            raise ConfigError("config needs a 'model'")
        m = raw["model"]
        model = model_from_dict(m) if isinstance(m, dict) else load_model(_resolve(base, m))
    except (KeyError, ValueError, TypeError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad model: {exc}") from None

    names = list(raw.get("feature_names") or [])
    data = None
    if raw.get("dataset") is not None:
        if raw.get("schema") is None:
            raise ConfigError("a dataset needs a schema")
        ds_path, schema_path = _resolve(base, raw["dataset"]), _resolve(base, raw["schema"])
        for p in (ds_path, schema_path):
            if not p.is_file():
                raise ConfigError(f"file not found: {p}")
        try:
            ds = load_dataset(ds_path, load_schema(schema_path))
        except (DatasetError, KeyError) as exc:
            raise ConfigError(f"bad dataset: {exc}") from None
        data = ds.matrix()
        names = names or ds.feature_names

    cons = raw.get("constraints") or {}
    if not isinstance(cons, dict):
        raise ConfigError("constraints must be a mapping")
    bounds = cons.get("box", raw.get("bounds"))
    if bounds is None:
        if data is None or len(data) == 0:
            raise ConfigError("need box bounds or a dataset to derive them from")
        lo, hi = data.min(axis=0), data.max(axis=0)
        pad = np.where(hi > lo, 0.1 * (hi - lo), 1.0)
        bounds = np.column_stack([lo - pad, hi + pad])
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ConfigError("box must be a list of [lower, upper] pairs")
    lo, hi = bounds[:, 0], bounds[:, 1]

    if raw.get("query") is not None and raw.get("query_rule") is not None:
        raise ConfigError("give either 'query' or 'query_rule'")
    if raw.get("query") is not None:
        query = np.asarray(raw["query"], dtype=float)
    elif raw.get("query_rule") is not None:
        rule = raw["query_rule"]
        if data is not None:
            candidates = data
        else:
            rng = search.make_rng(int(rule.get("seed", 0)))
            candidates = lo + rng.uniform(size=(int(rule.get("candidates", 10_000)), lo.size)) * (hi - lo)
        query = _select_query(rule, model, candidates, lo, hi)
    else:
        raise ConfigError("config needs 'query' or 'query_rule'")
    if query.shape != (bounds.shape[0],):
        raise ConfigError(f"query has shape {query.shape}, box has {bounds.shape[0]} dimensions")
    if not names:
        names = [f"x{j}" for j in range(query.size)]
    if len(names) != query.size:
        raise ConfigError("feature_names length does not match the dimension")

    try:
        center = float(model(query))
    except ValueError as exc:
        raise ConfigError(f"model rejects the query: {exc}") from None
    pot_raw = raw.get("potential")
    if pot_raw is None:
        raise ConfigError("config needs a 'potential'")
    potentials = [_potential(p, center) for p in (pot_raw if isinstance(pot_raw, list) else [pot_raw])]

    strategy = raw.get("strategy")
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}")
    if len(potentials) > 1 and strategy != "bayes-cfx":
        raise ConfigError("several potentials are only supported by bayes-cfx")
    budget = raw.get("budget")
    if not isinstance(budget, int) or budget < 1:
        raise ConfigError("budget must be a positive integer")
    if strategy in BO_STRATEGIES and budget < search.N_INIT:
        raise ConfigError(f"budget must be at least {search.N_INIT} for {strategy}")
    seeds = raw.get("seeds", [0])
    seeds = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    if not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError("seeds must be a non-empty list of non-negative integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")

    l0 = cons.get("l0")
    l0_bounds = list(l0) if isinstance(l0, list) else [l0]
    sign = cons.get("sign")
    if sign is not None:
        try:
            sign = tuple(SIGN_WORDS[s] if isinstance(s, str) else int(s) for s in sign)
        except KeyError as exc:
            raise ConfigError(f"unknown sign constraint {exc}") from None
    A, b = cons.get("A"), cons.get("b")

    rho_star = raw.get("rho_star")
    if rho_star is not None and rho_star != "grid" and not isinstance(rho_star, (int, float)):
        raise ConfigError("rho_star must be a number, 'grid' or absent")
    lp = raw.get("localopt") or {}
    try:
        localopt = LocalOptParams(float(lp.get("step", 0.1)), float(lp.get("tol", 1e-6)),
                                  int(lp.get("max_iters", 200)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = os.environ.get(OUTPUT_ENV) or raw.get("output_dir") or "cfxbo_out"
    epsilon = float(raw.get("epsilon", 0.05))
    if not 0.0 < epsilon < 1.0:
        raise ConfigError("epsilon must lie in (0, 1)")

    cfg = RunConfig(model, query, bounds, potentials, strategy, budget, seeds, epsilon, l0_bounds, sign,
                    tuple(cons.get("integer_dims", ())), None if A is None else np.asarray(A, dtype=float),
                    None if b is None else np.asarray(b, dtype=float), names, rho_star,
                    bool(raw.get("hyperopt", True)), bool(raw.get("timing", False)), localopt,
                    _resolve(base, out) if not os.environ.get(OUTPUT_ENV) else Path(out))
    for k in cfg.l0_bounds:
        try:
            cfg.problem(k)
        except ValueError as exc:
            raise ConfigError(f"bad search problem: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(_read_file(path), path.parent)


def _run_one(cfg: RunConfig, problem: SearchProblem, seed: int, rho_star) -> list:
    kw = dict(epsilon=cfg.epsilon, rho_star=rho_star)
    if cfg.strategy == "bayes-cfx":
        return search.run_multi_cfx(problem, cfg.potentials, cfg.budget, seed, hyperopt=cfg.hyperopt, **kw)
    pot = cfg.potentials[0]
    if cfg.strategy == "bayes-naive":
        return [search.run_bayes_naive(problem, pot, cfg.budget, seed, hyperopt=cfg.hyperopt, **kw)]
    if cfg.strategy == "random":
        return [search.run_random(problem, pot, cfg.budget, seed, **kw)]
    return [search.run_localopt(problem, pot, cfg.budget, seed, cfg.localopt, **kw)]


def _target_label(p: PotentialSpec) -> str:
    return f"{p.kind.value} center={p.center:.6g} width={p.width:.6g}"


def _stderr(v: np.ndarray) -> float:
    return float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0


def execute(cfg: RunConfig) -> dict:
    """Run every (l0 bound, potential, seed) combination and write the artifacts."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    sweep = len(cfg.l0_bounds) > 1
    multi = len(cfg.potentials) > 1
    groups = []
    cf_rows = []
    for l0 in cfg.l0_bounds:
        problem = cfg.problem(l0)
        problem.check_feasible()
        if cfg.rho_star == "grid":
            stars = [("grid", search.grid_rho_star(problem, p)) for p in cfg.potentials]
        else:
            stars = [cfg.rho_star] * len(cfg.potentials)
        per_pot = [[] for _ in cfg.potentials]
        for seed in cfg.seeds:
            traces = _run_one(cfg, problem, seed, stars if len(stars) > 1 else stars[0])
            for i, tr in enumerate(traces):
                per_pot[i].append(tr)
        for i, traces in enumerate(per_pot):
            tag = "_".join(t for t in ((f"l0-{l0 if l0 is not None else 'none'}" if sweep else ""),
                                       (f"p{i}" if multi else "")) if t)
            for tr in traces:
                name = f"trace_{tag}_{tr.seed}.jsonl" if tag else f"trace_{tr.seed}.jsonl"
                with open(out / name, "w") as fh:
                    tr.to_jsonl(fh, timing=cfg.timing)
            terminal = np.array([tr.records[-1].incumbent for tr in traces])
            n = min(len(tr) for tr in traces)
            curves = np.array([tr.incumbents[:n] for tr in traces])
            groups.append({
                "tag": tag or "default",
                "l0_bound": l0,
                "potential": cfg.potentials[i].to_dict(),
                "strategy": cfg.strategy,
                "runs": [tr.summary() for tr in traces],
                "terminal_incumbent_mean": float(terminal.mean()),
                "terminal_incumbent_stderr": _stderr(terminal),
                "curve_mean": curves.mean(axis=0).tolist(),
                "curve_stderr": [_stderr(c) for c in curves.T],
            })
            best = max(traces, key=lambda t: (t.best.rho, -t.seed))
            x = np.array(best.best.x)
            row = {"target": _target_label(cfg.potentials[i]),
                   "l0_bound": "none" if l0 is None else l0, "seed": best.seed}
            for name, dv in zip(cfg.feature_names, x - cfg.query):
                row[f"delta_{name}"] = repr(float(dv))
            row["result_change"] = repr(float(best.best.f - problem.evaluate(cfg.query)))
            cf_rows.append(row)
    summary = {"query": cfg.query.tolist(), "query_output": float(cfg.model(cfg.query)),
               "budget": cfg.budget, "seeds": cfg.seeds, "epsilon": cfg.epsilon,
               "rng": "numpy PCG64", "groups": groups}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "counterfactuals.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(cf_rows[0]))
        w.writeheader()
        w.writerows(cf_rows)
    return summary


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        execute(cfg)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"wrote results to {cfg.output_dir}")
    return EXIT_OK


def cmd_quadrature(args) -> int:
    if not 1 <= args.n <= 256:
        print("error: n must lie in [1, 256]", file=sys.stderr)
        return EXIT_CONFIG
    rule = (gauss_hermite if args.family == "hermite" else gauss_legendre)(args.n)
    if args.out == "-":
        write_rule_csv(rule, sys.stdout)
    else:
        with open(args.out, "w") as fh:
            write_rule_csv(rule, fh)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validate import format_table, run_all

    results = run_all()
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfxbo", description="Counterfactual search with Bayesian optimisation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a search experiment from a JSON/YAML config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("quadrature", help="write a Gauss quadrature rule as CSV")
    p.add_argument("--family", choices=("hermite", "legendre"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.set_defaults(func=cmd_quadrature)

    p = sub.add_parser("validate", help="run the oracle-equivalence self tests")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
