"""Command-line interface: ``qform {pvalue,moments,simulate,bench}``.

Exit status is 0 on success, 1 on a numerical failure and 2 on a usage
or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager

from . import bench, simgen
from .errors import MatrixParseError, QFormError
from .exact import NOT_RESOLVABLE_BELOW, imhof, mc_tail
from .linalg import read_matrix_csv, read_vector_csv
from .matchers import ALL_METHODS, fit, parse_methods, tail_probability
from .moments import PATHS, cumulants, standardize
from .reduction import QuadraticFormSpec, reduce

log = logging.getLogger("qform")

DEFAULT_SEED = 20240607
EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise UsageError("empty number list")
    return values


def _ints(text: str) -> list[int]:
    try:
        values = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise UsageError("empty integer list")
    return values


def fmt(x: float) -> str:
    return format(float(x), ".17g")


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _load_spec(args) -> QuadraticFormSpec:
    sigma = read_matrix_csv(args.sigma)
    A = read_matrix_csv(args.a) if args.a else None
    mu = read_vector_csv(args.mu) if args.mu else None
    if A is not None and A.shape != sigma.shape:
        raise UsageError(f"A is {A.shape[0]}x{A.shape[0]} but sigma is {sigma.shape[0]}x{sigma.shape[0]}")
    if mu is not None and mu.shape != (sigma.shape[0],):
        raise UsageError(f"mu has {mu.size} entries, sigma is {sigma.shape[0]}x{sigma.shape[0]}")
    try:
        return QuadraticFormSpec(sigma=sigma, A=A, mu=mu)
    except ValueError as exc:
        raise UsageError(str(exc))


def _methods(text) -> list[str]:
    try:
        return parse_methods(text)
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_pvalue(args) -> int:
    spec = _load_spec(args)
    qs = [q for chunk in args.q for q in _floats(chunk)]
    methods = _methods(args.methods)
    m = standardize(cumulants(spec, args.path))
    sf = reduce(spec) if {"Exact", "MC"} & set(methods) else None
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "method", "p_value", "status"])
        for q in qs:
            for method in methods:
                if method == "Exact":
                    r = imhof(sf, q)
                    status = "ok" if r.resolvable else f"not-resolvable:<{NOT_RESOLVABLE_BELOW:g}"
                    w.writerow([fmt(q), method, fmt(r.p), status])
                elif method == "MC":
                    p, se = mc_tail(sf, q, args.reps, args.seed)
                    w.writerow([fmt(q), method, fmt(p), f"se={fmt(se)}"])
                else:
                    r = fit(method, m)
                    w.writerow([fmt(q), method, fmt(tail_probability(q, r)), r.status])
    return EXIT_OK


def cmd_moments(args) -> int:
    spec = _load_spec(args)
    c = cumulants(spec, args.path)
    m = standardize(c)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "c1", "c2", "c3", "c4", "mean", "variance", "skewness", "kurtosis"])
        w.writerow([args.path, *map(fmt, c.as_tuple()),
                    *map(fmt, (m.mean, m.variance, m.skewness, m.kurtosis))])
    return EXIT_OK


def load_sim_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}")
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: top level must be a JSON object")
    return cfg


def models_from_config(cfg: dict) -> list[simgen.CorrelationModel]:
    ns = cfg.get("n", list(simgen.DEFAULT_NS))
    ns = [ns] if isinstance(ns, int) else list(ns)
    offset = int(cfg.get("lag_offset", 0))
    try:
        if "models" in cfg:
            return [
                simgen.CorrelationModel(d["base"], d["block_type"], n, float(d["parameter"]),
                                        int(d.get("lag_offset", offset)))
                for n in ns
                for d in cfg["models"]
            ]
        bases = cfg.get("bases", list(simgen.BASES))
        types = cfg.get("block_types", list(simgen.BLOCK_TYPES))
        rhos = cfg.get("rho", list(simgen.DEFAULT_RHOS))
        phis = cfg.get("phi", list(simgen.DEFAULT_PHIS))
        return [
            m for m in simgen.default_models(ns, rhos, phis, offset)
            if m.base in bases and m.block_type in types
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad model specification: {exc}")


def cmd_simulate(args) -> int:
    cfg = load_sim_config(args.config)
    methods = _methods(args.methods if args.methods is not None else cfg.get("methods", []))
    bad = [m for m in methods if m not in simgen.SIM_METHODS]
    if bad:
        raise UsageError(f"methods {bad} are not available in simulations")
    alphas = _floats(args.alphas) if args.alphas else [float(a) for a in cfg.get("alphas", [0.05, 0.01])]
    if not all(0 < a < 1 for a in alphas):
        raise UsageError("alphas must lie in (0, 1)")
    reps = args.reps if args.reps is not None else int(cfg.get("reps", 100_000))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", DEFAULT_SEED))
    block = int(cfg.get("block_size", simgen.DEFAULT_BLOCK))
    workers = simgen.worker_count(args.workers if args.workers is not None else cfg.get("workers"))
    means = cfg.get("means", list(simgen.MEAN_VARIANTS))
    for mv in means:
        if mv not in simgen.MEAN_VARIANTS:
            raise UsageError(f"unknown mean variant {mv!r}")
    models = models_from_config(cfg)
    if reps <= 0:
        raise UsageError("reps must be positive")

    with _output(args.out) as fh:
        w = csv.DictWriter(fh, fieldnames=simgen.CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for model in models:
            try:
                simgen.build_correlation(model)
            except QFormError as exc:
                log.warning("skipping %s: %s", model.label, exc)
                continue
            for mv in means:
                report = simgen.run_type1_experiment(model, mv, methods, alphas, reps, seed,
                                                     workers, block)
                w.writerows(report.csv_rows())
                fh.flush()
    return EXIT_OK


def cmd_bench(args) -> int:
    n_grid = _ints(args.n_grid)
    if args.task == "moments":
        report = bench.bench_moments(n_grid, reps=args.reps)
    else:
        methods = _methods(args.methods) if args.methods else list(bench.TAIL_METHODS)
        bad = [m for m in methods if m not in bench.TAIL_METHODS]
        if bad:
            raise UsageError(f"methods {bad} cannot be benchmarked")
        report = bench.bench_tail(n_grid, n_calls=args.n_calls, reps=args.reps, methods=methods,
                                  exact_calls=args.exact_calls)
    with _output(args.out) as fh:
        w = csv.DictWriter(fh, fieldnames=bench.BENCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(report.csv_rows())
    if args.points:
        with open(args.points, "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["task", "method", "n", "rep", "seconds"])
            w.writerows(report.point_rows())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qform", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add_form_args(sp):
        sp.add_argument("--sigma", required=True, help="covariance matrix CSV")
        sp.add_argument("--a", help="weight matrix CSV (default: identity)")
        sp.add_argument("--mu", help="mean vector CSV (default: zero)")
        sp.add_argument("--path", choices=sorted(PATHS), default="fast",
                        help="cumulant computation path")
        sp.add_argument("--out", help="output CSV (default: stdout)")

    sp = sub.add_parser("pvalue", help="right-tail probabilities P(Q > q)")
    add_form_args(sp)
    sp.add_argument("--q", action="append", required=True, help="comma-separated q values")
    sp.add_argument("--methods", default="MR", help=f"comma-separated, from {','.join(ALL_METHODS)}")
    sp.add_argument("--reps", type=int, default=1_000_000, help="Monte Carlo draws for MC")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.set_defaults(func=cmd_pvalue)

    sp = sub.add_parser("moments", help="cumulants and standardized moments of Q")
    add_form_args(sp)
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("simulate", help="empirical type-I-error study from a JSON config")
    sp.add_argument("config")
    sp.add_argument("--methods")
    sp.add_argument("--alphas")
    sp.add_argument("--reps", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int, help="worker processes (default: $QFORM_THREADS or 1)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bench", help="timing ratios for moments or tail evaluation")
    sp.add_argument("--task", choices=("moments", "tail"), required=True)
    sp.add_argument("--n-grid", default="100,500")
    sp.add_argument("--reps", type=int, default=5)
    sp.add_argument("--n-calls", type=int, default=50_000)
    sp.add_argument("--exact-calls", type=int, default=200)
    sp.add_argument("--methods")
    sp.add_argument("--out")
    sp.add_argument("--points", help="optional per-repetition TSV")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, MatrixParseError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"qform: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QFormError as exc:
        print(f"qform: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"qform: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
