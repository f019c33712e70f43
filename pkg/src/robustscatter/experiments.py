"""Declarative Monte Carlo drivers emitting CSV tables at desk scale.

Each figure family has a runner keyed by ``ExperimentConfig.figure``:

    alpha_curve         pseudo-correlation of the weighted covariance over a
                        tuning-exponent grid on independent skewed columns
    indep_boxplot       pseudo-correlations of nine estimators on independent
                        skewed columns
    ica_boxplot         minimum-distance index of two-scatter ICA for five
                        scatter pairs on skewed sources
    regression_boxplot  plug-in regression slope for y = 5 x + eps
    pcor_boxplot        plug-in partial correlation for u = 4x+e1, v = 5x+e2
    timing              wall-clock scaling of the (symmetrized) M-estimators

Replication r draws from the derived stream mix_seed(seed, r), so runs are
reproducible and order-independent; a bounded thread pool may execute
replications concurrently without changing any emitted number (timing fields
excepted). Desk-scale defaults shrink the full-size replication counts so a
complete pass stays within minutes.
"""

from __future__ import annotations

import csv
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import randgen
from .errors import InvalidInput, RobustScatterError
from .estimators import Estimator, make_estimator
from .matcore import pseudo_correlation
from .plugin import md_index, observational_regression, partial_correlation, two_scatter_ica

FIGURES = (
    "alpha_curve",
    "indep_boxplot",
    "ica_boxplot",
    "regression_boxplot",
    "pcor_boxplot",
    "timing",
)

NINE_ESTIMATORS = ("COV", "CAU", "sCAU", "HUB", "sHUB", "TYL", "sTYL", "MVE", "MCD")
ICA_PAIRS = (
    ("COV", "WCOV2"),
    ("CAU", "COV"),
    ("sCAU", "COV"),
    ("TYL", "HUB"),
    ("sTYL", "sHUB"),
)
DEFAULT_ALPHA_GRID = tuple(np.arange(-3.0, 6.0 + 1e-9, 0.5))
DEFAULT_TIMING_N_GRID = (100, 200, 400, 800, 1600, 3200)
DEFAULT_TIMING_P_GRID = (2, 5, 10)


@dataclass(frozen=True)
class ExperimentConfig:
    """One declarative Monte Carlo run."""

    figure: str
    n: int
    reps: int
    seed: int
    p: int | None = None
    estimators: tuple[str, ...] | None = None
    workers: int = 1
    alpha_grid: tuple[float, ...] | None = None
    columns: str = "chisq1"  # alpha_curve variant: chisq1 | twopoint
    n_grid: tuple[int, ...] | None = None
    p_grid: tuple[int, ...] | None = None
    runs: int = 5
    out_dir: str | None = None

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise InvalidInput(f"unknown figure {self.figure!r}; expected {FIGURES}")
        if self.reps < 1:
            raise InvalidInput("reps must be >= 1")
        if self.estimators is not None and len(self.estimators) == 0:
            raise InvalidInput("estimator list must be non-empty")


def default_config(figure: str, **overrides) -> ExperimentConfig:
    """Desk-scale defaults per figure (full scale is just larger reps/n)."""
    base = {
        "alpha_curve": dict(n=5000, reps=200, p=2),
        "indep_boxplot": dict(n=1000, reps=200, p=5),
        "ica_boxplot": dict(n=1000, reps=100, p=2),
        "regression_boxplot": dict(n=2000, reps=100, p=1),
        "pcor_boxplot": dict(n=2000, reps=100, p=1),
        "timing": dict(n=0, reps=1, p=None),
    }
    if figure not in base:
        raise InvalidInput(f"unknown figure {figure!r}")
    kw = dict(base[figure], figure=figure, seed=20260810)
    kw.update(overrides)
    return ExperimentConfig(**kw)


@dataclass
class RepRecord:
    estimator: str
    rep: int
    statistic: float
    converged: bool
    seconds: float


@dataclass
class SummaryRow:
    estimator: str
    median: float
    q1: float
    q3: float
    mc_se: float
    n_fail: int


@dataclass
class ExperimentReport:
    figure: str
    config: ExperimentConfig
    records: list[RepRecord]
    summaries: list[SummaryRow]
    extras: dict = field(default_factory=dict)

    def statistics(self, estimator: str) -> np.ndarray:
        """Converged per-replication statistics for one estimator tag."""
        return np.asarray(
            [r.statistic for r in self.records if r.estimator == estimator and r.converged]
        )

    def summary(self, estimator: str) -> SummaryRow:
        for row in self.summaries:
            if row.estimator == estimator:
                return row
        raise KeyError(estimator)

    def write_csv(self, out_dir: str) -> tuple[str, str]:
        """Write the raw and summary CSV files; returns their paths."""
        os.makedirs(out_dir, exist_ok=True)
        raw_path = os.path.join(out_dir, f"{self.figure}_raw.csv")
        summary_path = os.path.join(out_dir, f"{self.figure}_summary.csv")
        with open(raw_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["figure", "estimator", "rep", "statistic", "converged", "seconds"])
            for r in self.records:
                w.writerow(
                    [
                        self.figure,
                        r.estimator,
                        r.rep,
                        repr(float(r.statistic)),
                        str(bool(r.converged)).lower(),
                        repr(float(r.seconds)),
                    ]
                )
        with open(summary_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["estimator", "median", "q1", "q3", "mc_se", "n_fail"])
            for s in self.summaries:
                w.writerow(
                    [
                        s.estimator,
                        repr(float(s.median)),
                        repr(float(s.q1)),
                        repr(float(s.q3)),
                        repr(float(s.mc_se)),
                        s.n_fail,
                    ]
                )
        return raw_path, summary_path


def robust_sigma(values) -> float:
    """IQR-based spread estimate (normal-consistent)."""
    v = np.asarray(values, dtype=float)
    q1, q3 = np.percentile(v, [25.0, 75.0])
    return float((q3 - q1) / 1.349)


def mc_se_median(values) -> float:
    """Robust Monte Carlo standard error of the sample median."""
    v = np.asarray(values, dtype=float)
    return 1.2533 * robust_sigma(v) / math.sqrt(len(v))


def mc_se_mean(values) -> float:
    """Robust Monte Carlo standard error of the sample mean."""
    v = np.asarray(values, dtype=float)
    return robust_sigma(v) / math.sqrt(len(v))


def _summarize(records: list[RepRecord]) -> list[SummaryRow]:
    tags: list[str] = []
    for r in records:
        if r.estimator not in tags:
            tags.append(r.estimator)
    rows = []
    for tag in tags:
        ok = [r.statistic for r in records if r.estimator == tag and r.converged]
        n_fail = sum(1 for r in records if r.estimator == tag and not r.converged)
        if ok:
            v = np.asarray(ok)
            rows.append(
                SummaryRow(
                    estimator=tag,
                    median=float(np.median(v)),
                    q1=float(np.percentile(v, 25.0)),
                    q3=float(np.percentile(v, 75.0)),
                    mc_se=mc_se_median(v),
                    n_fail=n_fail,
                )
            )
        else:
            rows.append(SummaryRow(tag, math.nan, math.nan, math.nan, math.nan, n_fail))
    return rows


_WCOV_RE = re.compile(r"^(s?)wcov\(?([-+0-9.eE]+)\)?$")


def resolve_estimator(name: str, subset_seed: int = 0) -> Estimator:
    """Estimator tags accepted in configs: the nine names plus wcov variants."""
    m = _WCOV_RE.match(name.strip().lower())
    if m:
        return make_estimator(
            ("s" if m.group(1) else "") + "wcov", alpha=float(m.group(2))
        )
    return make_estimator(name, subset_seed=subset_seed)


def _run_reps(cfg: ExperimentConfig, one_rep) -> list[RepRecord]:
    """Execute one_rep(rep, rep_seed) for every replication, possibly pooled."""
    reps = range(cfg.reps)
    seeds = [randgen.mix_seed(cfg.seed, r) for r in reps]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(lambda args: one_rep(*args), zip(reps, seeds)))
    else:
        chunks = [one_rep(r, s) for r, s in zip(reps, seeds)]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.rep, r.estimator))
    return records


def _timed_fit(tag: str, rep: int, fn) -> RepRecord:
    t0 = time.perf_counter()
    try:
        statistic, converged = fn()
    except RobustScatterError:
        statistic, converged = math.nan, False
    seconds = time.perf_counter() - t0
    return RepRecord(tag, rep, float(statistic), bool(converged), seconds)


def run_alpha_curve(cfg: ExperimentConfig) -> ExperimentReport:
    """Mean pseudo-correlation of the weighted covariance over an alpha grid."""
    from .scatter import wcov

    grid = cfg.alpha_grid if cfg.alpha_grid is not None else DEFAULT_ALPHA_GRID
    p_values = (cfg.p,) if cfg.p is not None else (2, 5, 10)
    multi_p = len(p_values) > 1

    def one_rep(rep: int, rep_seed: int) -> list[RepRecord]:
        out = []
        for p in p_values:
            if cfg.columns == "twopoint":
                col = randgen.discrete((-0.5, 2.0), (0.8, 0.2))
            else:
                col = randgen.chisq_std(1)
            x = randgen.independent_product([col] * p, cfg.n, rep_seed)
            for alpha in grid:
                tag = (
                    f"wcov(a={alpha:g},p={p})" if multi_p else f"wcov(a={alpha:g})"
                )
                out.append(
                    _timed_fit(
                        tag,
                        rep,
                        lambda a=alpha, xx=x: (
                            pseudo_correlation(wcov(xx, a).scatter, 0, 1),
                            True,
                        ),
                    )
                )
        return out

    records = _run_reps(cfg, one_rep)
    return ExperimentReport(cfg.figure, cfg, records, _summarize(records))


def run_indep_boxplot(cfg: ExperimentConfig) -> ExperimentReport:
    """Pseudo-correlation rho_12 of each estimator on independent skewed columns."""
    names = cfg.estimators if cfg.estimators is not None else NINE_ESTIMATORS
    ests = [resolve_estimator(nm, subset_seed=cfg.seed) for nm in names]
    p = cfg.p if cfg.p is not None else 5

    def one_rep(rep: int, rep_seed: int) -> list[RepRecord]:
        x = randgen.independent_product([randgen.chisq_std(1)] * p, cfg.n, rep_seed)
        out = []
        for est in ests:
            def stat(e=est):
                res = e.fit(x)
                return pseudo_correlation(res.scatter, 0, 1), res.converged
            out.append(_timed_fit(est.tag, rep, stat))
        return out

    records = _run_reps(cfg, one_rep)
    return ExperimentReport(cfg.figure, cfg, records, _summarize(records))


def run_ica_boxplot(cfg: ExperimentConfig) -> ExperimentReport:
    """Minimum-distance index of two-scatter ICA for the five scatter pairs."""
    if cfg.estimators is not None:
        names = [tuple(nm.split("-", 1)) for nm in cfg.estimators]
    else:
        names = list(ICA_PAIRS)
    pairs = [
        (f"{a}-{b}", resolve_estimator(a, cfg.seed), resolve_estimator(b, cfg.seed))
        for a, b in names
    ]

    def one_rep(rep: int, rep_seed: int) -> list[RepRecord]:
        sources = randgen.independent_product(
            [randgen.chisq_std(1), randgen.chisq_std(2)], cfg.n, rep_seed
        )
        out = []
        for tag, e1, e2 in pairs:
            def stat(a=e1, b=e2):
                unmix = two_scatter_ica(sources, a, b)  # mixing A = identity
                return md_index(unmix.W), True
            out.append(_timed_fit(tag, rep, stat))
        return out

    records = _run_reps(cfg, one_rep)
    return ExperimentReport(cfg.figure, cfg, records, _summarize(records))


def run_regression_boxplot(cfg: ExperimentConfig) -> ExperimentReport:
    """Plug-in slope estimates for y = 5 x + eps with skewed x and errors."""
    names = cfg.estimators if cfg.estimators is not None else NINE_ESTIMATORS
    ests = [resolve_estimator(nm, subset_seed=cfg.seed) for nm in names]

    def one_rep(rep: int, rep_seed: int) -> list[RepRecord]:
        cols = randgen.independent_product(
            [randgen.lognormal_std(1.0), randgen.exponential_std()], cfg.n, rep_seed
        )
        x = cols[:, :1]
        y = 5.0 * x + cols[:, 1:]
        out = []
        for est in ests:
            def stat(e=est):
                res = observational_regression(x, y, e)
                return float(res.B[0, 0]), True
            out.append(_timed_fit(est.tag, rep, stat))
        return out

    records = _run_reps(cfg, one_rep)
    return ExperimentReport(cfg.figure, cfg, records, _summarize(records))


def run_pcor_boxplot(cfg: ExperimentConfig) -> ExperimentReport:
    """Plug-in partial correlation for u = 4x + e1, v = 5x + e2 given x."""
    names = cfg.estimators if cfg.estimators is not None else NINE_ESTIMATORS
    ests = [resolve_estimator(nm, subset_seed=cfg.seed) for nm in names]

    def one_rep(rep: int, rep_seed: int) -> list[RepRecord]:
        cols = randgen.independent_product(
            [
                randgen.standard_normal(),
                randgen.lognormal_std(1.0),
                randgen.chisq_std(1),
            ],
            cfg.n,
            rep_seed,
        )
        x = cols[:, 0]
        u = 4.0 * x + cols[:, 1]
        v = 5.0 * x + cols[:, 2]
        out = []
        for est in ests:
            def stat(e=est):
                res = partial_correlation(u, v, x[:, None], e)
                return res.rho, True
            out.append(_timed_fit(est.tag, rep, stat))
        return out

    records = _run_reps(cfg, one_rep)
    return ExperimentReport(cfg.figure, cfg, records, _summarize(records))


def run_timing(cfg: ExperimentConfig) -> ExperimentReport:
    """Median-of-runs wall times over an n grid, with fitted log-log slopes.

    Slopes are reported in ``extras["slopes"]`` and as extra summary rows
    tagged ``slope:<estimator>:p=<p>`` (the median column holds the slope).
    """
    names = cfg.estimators if cfg.estimators is not None else ("sTYL", "sHUB", "TYL", "HUB")
    n_grid = cfg.n_grid if cfg.n_grid is not None else DEFAULT_TIMING_N_GRID
    p_grid = cfg.p_grid if cfg.p_grid is not None else (
        (cfg.p,) if cfg.p is not None else DEFAULT_TIMING_P_GRID
    )
    runs = max(1, cfg.runs)

    records: list[RepRecord] = []
    medians: dict[tuple[str, int], list[tuple[int, float]]] = {}
    stream = 0
    for p in p_grid:
        rng = np.random.default_rng(randgen.mix_seed(cfg.seed, 10_000 + p))
        a = rng.standard_normal((p, p))
        sigma = a @ a.T + 0.5 * np.eye(p)
        for n in n_grid:
            stream += 1
            x = randgen.sample(
                randgen.multivariate_normal(np.zeros(p), sigma),
                n,
                randgen.mix_seed(cfg.seed, stream),
            )
            for name in names:
                est = resolve_estimator(name, cfg.seed)
                times = []
                for run in range(runs):
                    t0 = time.perf_counter()
                    res = est.fit(x)
                    dt = time.perf_counter() - t0
                    times.append(dt)
                    records.append(
                        RepRecord(
                            f"{name}:n={n}:p={p}", run, dt, bool(res.converged), dt
                        )
                    )
                medians.setdefault((name, p), []).append((n, float(np.median(times))))

    summaries = _summarize(records)
    slopes: dict[str, float] = {}
    for (name, p), pts in medians.items():
        ns = np.log([q[0] for q in pts])
        ts = np.log([max(q[1], 1e-9) for q in pts])
        slope = float(np.polyfit(ns, ts, 1)[0]) if len(pts) > 1 else math.nan
        slopes[f"{name}:p={p}"] = slope
        summaries.append(
            SummaryRow(f"slope:{name}:p={p}", slope, math.nan, math.nan, math.nan, 0)
        )
    return ExperimentReport(
        cfg.figure, cfg, records, summaries, extras={"slopes": slopes}
    )


_RUNNERS = {
    "alpha_curve": run_alpha_curve,
    "indep_boxplot": run_indep_boxplot,
    "ica_boxplot": run_ica_boxplot,
    "regression_boxplot": run_regression_boxplot,
    "pcor_boxplot": run_pcor_boxplot,
    "timing": run_timing,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Dispatch a config to its figure runner; writes CSVs when out_dir set."""
    report = _RUNNERS[cfg.figure](cfg)
    if cfg.out_dir:
        report.write_csv(cfg.out_dir)
    return report
