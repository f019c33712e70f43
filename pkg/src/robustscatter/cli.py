"""Command-line surface: estimation, plug-in methods, experiments, benchmarks.

Every subcommand is a thin shell over the library; emitted numbers equal the
corresponding library call exactly. Exit codes: 0 success, 1 usage or input
error (including unparseable CSV), 2 estimation failure.

The worker count for experiments comes from --workers, or from the
ROBUSTSCATTER_WORKERS environment variable when the flag is absent.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import matcore
from ._pairwise import KIND_CAUCHY, available_backends
from .errors import InvalidInput, RobustScatterError
from .estimators import make_estimator
from .experiments import ExperimentConfig, default_config, run_experiment
from .plugin import observational_regression, partial_correlation, two_scatter_ica
from .scatter import IRLSSettings
from .selftest import run_selftest

WORKERS_ENV = "ROBUSTSCATTER_WORKERS"

USAGE_EXIT = 1
ESTIMATION_EXIT = 2


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def read_csv_matrix(path: str) -> np.ndarray:
    """Parse a numeric CSV with optional header; diagnostics carry line/column."""
    rows: list[list[float]] = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InvalidInput(f"cannot open {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            values = []
            bad_col = None
            for col, cell in enumerate(cells, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    bad_col = col
                    break
            if bad_col is not None:
                if lineno == 1 and not rows:
                    continue  # header row
                raise InvalidInput(
                    f"{path}: line {lineno}, column {bad_col}: "
                    f"{cells[bad_col - 1]!r} is not numeric"
                )
            if not np.all(np.isfinite(values)):
                col = int(np.argmin(np.isfinite(values))) + 1
                raise InvalidInput(
                    f"{path}: line {lineno}, column {col}: non-finite value"
                )
            if rows and len(values) != len(rows[0]):
                raise InvalidInput(
                    f"{path}: line {lineno}: expected {len(rows[0])} columns, "
                    f"got {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise InvalidInput(f"{path}: no numeric rows found")
    return np.asarray(rows, dtype=float)


def _matrix_rows(m: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.atleast_2d(m)]


def _write_output(doc: dict, out: str | None, fmt: str) -> None:
    if fmt == "json":
        text = json.dumps(doc, indent=2, sort_keys=True)
    else:
        lines = []
        for key, value in doc.items():
            if isinstance(value, list) and value and isinstance(value[0], list):
                lines.append(f"# {key}")
                lines.extend(",".join(repr(v) for v in row) for row in value)
            else:
                lines.append(f"# {key}")
                lines.append(json.dumps(value))
        text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text)


def _estimator_from_args(args, n_rows: int):
    irls = IRLSSettings()
    name = args.estimator
    if getattr(args, "symmetrized", False) and not name.lower().startswith("s"):
        name = "s" + name
    kwargs = dict(
        q=args.q,
        h=args.h,
        subset_seed=args.seed,
        irls=irls,
        parallel=args.threads > 1,
        threads=args.threads,
    )
    if args.alpha is not None:
        kwargs["alpha"] = args.alpha
    return make_estimator(name, **kwargs)


def _add_estimator_flags(sp, default="cov"):
    sp.add_argument("--estimator", default=default,
                    help="cov|wcov|cauchy|huber|tyler|mve|mcd (s-prefix or "
                         "--symmetrized for pairwise-difference versions)")
    sp.add_argument("--alpha", type=float, default=None, help="wcov exponent")
    sp.add_argument("--q", type=float, default=0.7, help="huber tuning quantile")
    sp.add_argument("--h", type=int, default=None, help="subset size for mve/mcd")
    sp.add_argument("--symmetrized", action="store_true",
                    help="use the pairwise-difference version")
    sp.add_argument("--fixed-location", default=None,
                    help="comma-separated location vector")
    sp.add_argument("--seed", type=int, default=0, help="seed for subset restarts")
    sp.add_argument("--threads", type=int, default=1,
                    help="worker threads for pairwise accumulation")
    sp.add_argument("--out", default=None, help="output path (default stdout)")
    sp.add_argument("--format", choices=("json", "csv"), default=None,
                    help="output format (default: by extension, else json)")


def _result_doc(res) -> dict:
    doc = {
        "scatter": _matrix_rows(res.scatter),
        "pseudo_correlation": _matrix_rows(
            matcore.pseudo_correlation_matrix(res.scatter)
        ),
        "estimator": res.family_tag,
        "iterations": res.iterations,
        "converged": res.converged,
        "n_dropped": res.n_dropped,
    }
    if res.location is not None:
        doc["location"] = [float(v) for v in res.location]
        doc["location_is_estimate"] = res.location_is_estimate
    return doc


def cmd_scatter(args) -> int:
    x = read_csv_matrix(args.input)
    est = _estimator_from_args(args, x.shape[0])
    if args.fixed_location is not None:
        loc = tuple(float(v) for v in args.fixed_location.split(","))
        from .scatter import ScatterSpec, fit_plain

        fam = {"cov": "cov", "wcov": "wcov", "cauchy": "m_cauchy", "cau": "m_cauchy",
               "huber": "m_huber", "hub": "m_huber", "tyler": "tyler",
               "tyl": "tyler"}.get(args.estimator.lower())
        if fam is None:
            raise InvalidInput(
                f"--fixed-location is not supported for {args.estimator!r}"
            )
        res = fit_plain(x, ScatterSpec(fam, alpha=args.alpha, q=args.q,
                                       fixed_location=loc))
    else:
        res = est.fit(x)
    fmt = args.format or ("csv" if args.out and args.out.endswith(".csv") else "json")
    _write_output(_result_doc(res), args.out, fmt)
    return 0


def cmd_ica(args) -> int:
    x = read_csv_matrix(args.input)
    res = two_scatter_ica(x, args.v1, args.v2)
    doc = {
        "W": _matrix_rows(res.W),
        "whitener": _matrix_rows(res.whitener),
        "kurtosis_eigenvalues": [float(v) for v in res.kurtosis_eigenvalues],
        "v1": res.v1_tag,
        "v2": res.v2_tag,
    }
    fmt = args.format or ("csv" if args.out and args.out.endswith(".csv") else "json")
    _write_output(doc, args.out, fmt)
    return 0


def cmd_regress(args) -> int:
    z = read_csv_matrix(args.input)
    q = args.responses
    if not 1 <= q < z.shape[1]:
        raise InvalidInput(f"--responses must be in [1, {z.shape[1] - 1}], got {q}")
    x, y = z[:, :-q], z[:, -q:]
    est = _estimator_from_args(args, z.shape[0])
    res = observational_regression(x, y, est)
    doc = {
        "B": _matrix_rows(res.B),
        "alpha": None if res.alpha is None else [float(v) for v in res.alpha],
        "estimator": res.tag,
    }
    fmt = args.format or ("csv" if args.out and args.out.endswith(".csv") else "json")
    _write_output(doc, args.out, fmt)
    return 0


def cmd_pcor(args) -> int:
    z = read_csv_matrix(args.input)
    if z.shape[1] < 3:
        raise InvalidInput("pcor needs at least 3 columns (u, v, conditioning)")
    est = _estimator_from_args(args, z.shape[0])
    res = partial_correlation(z[:, 0], z[:, 1], z[:, 2:], est)
    doc = {
        "rho": res.rho,
        "rho_conditional": res.rho_conditional,
        "precision_entries": list(res.precision_entries),
        "estimator": res.tag,
    }
    fmt = args.format or ("csv" if args.out and args.out.endswith(".csv") else "json")
    _write_output(doc, args.out, fmt)
    return 0


def cmd_experiment(args) -> int:
    overrides = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        for key in ("figure", "n", "p", "reps", "seed", "estimators", "workers",
                    "alpha_grid", "columns", "n_grid", "p_grid", "runs", "out_dir"):
            if key in raw:
                value = raw[key]
                if isinstance(value, list):
                    value = tuple(value)
                overrides[key] = value
    figure = args.figure or overrides.pop("figure", None)
    if figure is None:
        raise InvalidInput("specify --figure or a config file with a figure entry")
    for flag in ("n", "p", "reps", "seed"):
        value = getattr(args, flag)
        if value is not None:
            overrides[flag] = value
    if args.workers is not None:
        overrides["workers"] = args.workers
    elif "workers" not in overrides and os.environ.get(WORKERS_ENV):
        overrides["workers"] = int(os.environ[WORKERS_ENV])
    overrides["out_dir"] = args.out or overrides.get("out_dir") or "."
    cfg = default_config(figure, **overrides)
    report = run_experiment(cfg)
    raw_path, summary_path = report.write_csv(cfg.out_dir)
    print(f"wrote {raw_path}")
    print(f"wrote {summary_path}")
    if cfg.figure == "timing":
        for tag, slope in sorted(report.extras["slopes"].items()):
            print(f"log-log slope {tag}: {slope:.3f}")
    else:
        for row in report.summaries:
            print(
                f"{row.estimator}: median {row.median:.5f} "
                f"[q1 {row.q1:.5f}, q3 {row.q3:.5f}] mc_se {row.mc_se:.5f} "
                f"fails {row.n_fail}"
            )
    return 0


def cmd_bench(args) -> int:
    backends = available_backends()
    if args.backend:
        missing = [b for b in args.backend if b not in backends]
        if missing:
            raise InvalidInput(f"backend(s) not available: {missing}")
        backends = {b: backends[b] for b in args.backend}
    n_grid = tuple(int(v) for v in args.n.split(","))
    p = args.p
    rng = np.random.default_rng(args.seed)
    print(f"pairwise-kernel benchmark: one cauchy-weight pass, p={p}, "
          f"runs={args.runs}")
    header = f"{'n':>7} " + " ".join(f"{name:>12}" for name in backends)
    print(header)
    slexp: dict[str, list[tuple[int, float]]] = {name: [] for name in backends}
    for n in n_grid:
        x = np.ascontiguousarray(rng.standard_normal((n, p)))
        a = np.eye(p)
        row = [f"{n:>7}"]
        for name, mod in backends.items():
            times = []
            for _ in range(args.runs):
                t0 = time.perf_counter()
                mod.pair_block_accum(x, a, 0, n, KIND_CAUCHY, p + 1.0, 0.0, 0.0)
                times.append(time.perf_counter() - t0)
            med = float(np.median(times))
            slexp[name].append((n, med))
            row.append(f"{med * 1e3:>10.2f}ms")
        print(" ".join(row))
    for name, pts in slexp.items():
        if len(pts) > 1:
            ls = np.polyfit(np.log([q[0] for q in pts]),
                            np.log([max(q[1], 1e-9) for q in pts]), 1)[0]
            print(f"log-log slope [{name}]: {ls:.3f}")
    if {"compiled", "python"} <= set(slexp):
        ratios = [
            py / max(c, 1e-12)
            for (_, py), (_, c) in zip(slexp["python"], slexp["compiled"])
        ]
        print(f"median speedup compiled vs python: {np.median(ratios):.2f}x")
    return 0


def cmd_selftest(args) -> int:
    results = run_selftest()
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} invariants pass")
    return 0 if not failed else 1


def build_parser() -> _Parser:
    parser = _Parser(prog="robustscatter",
                     description="Robust scatter estimation, symmetrization, "
                                 "plug-in methods, experiments, benchmarks.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("scatter", help="estimate a scatter matrix from CSV data")
    sp.add_argument("input", help="CSV file, rows = observations")
    _add_estimator_flags(sp)
    sp.set_defaults(func=cmd_scatter)

    sp = sub.add_parser("ica", help="two-scatter ICA unmixing from CSV data")
    sp.add_argument("input")
    sp.add_argument("--v1", default="cov", help="first scatter (whitening)")
    sp.add_argument("--v2", default="wcov(2)", help="second scatter (rotation)")
    sp.add_argument("--out", default=None)
    sp.add_argument("--format", choices=("json", "csv"), default=None)
    sp.set_defaults(func=cmd_ica)

    sp = sub.add_parser("regress", help="observational regression via a joint scatter")
    sp.add_argument("input", help="CSV with regressors then responses")
    sp.add_argument("--responses", type=int, default=1,
                    help="number of trailing response columns")
    _add_estimator_flags(sp, default="scau")
    sp.set_defaults(func=cmd_regress)

    sp = sub.add_parser("pcor", help="plug-in partial correlation of columns 1,2")
    sp.add_argument("input", help="CSV: u, v, conditioning columns")
    _add_estimator_flags(sp, default="scau")
    sp.set_defaults(func=cmd_pcor)

    sp = sub.add_parser("experiment", help="run a Monte Carlo figure experiment")
    sp.add_argument("--figure", choices=(
        "alpha_curve", "indep_boxplot", "ica_boxplot", "regression_boxplot",
        "pcor_boxplot", "timing"), default=None)
    sp.add_argument("--config", default=None, help="JSON config file")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--out", default=None, help="output directory for CSVs")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("bench", help="compare kernel backends (compiled vs python)")
    sp.add_argument("--n", default="200,400,800,1600",
                    help="comma-separated sample sizes")
    sp.add_argument("--p", type=int, default=5)
    sp.add_argument("--runs", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--backend", nargs="*", default=None,
                    help="restrict to specific backends")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("selftest", help="run the exact-algebra invariant suite")
    sp.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except RobustScatterError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return ESTIMATION_EXIT


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
