"""Minimum Volume Ellipsoid and Minimum Covariance Determinant estimators.

MCD follows the usual fast heuristic: many elemental starts, two cheap
concentration steps each, full concentration of the best few, rescaled by
the normal consistency factor. MVE exhausts all h-subsets for n <= 20 and
otherwise inflates elemental (p+1)-point ellipsoids, refining the best
candidate's h-subset with an exact minimum-volume enclosing ellipsoid.
A finite-support population MVE reproduces the exact functional by subset
enumeration.

Restarts are drawn from index sets keyed to a data-independent seed, so the
same subsets are visited for affinely transformed data.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from . import matcore
from .errors import DegenerateSubset, InvalidInput, SingularMatrix, Unsupported
from .randgen import mix_seed
from .scatter import ScatterResult

MAX_POPULATION_ATOMS = 20


@dataclass(frozen=True)
class SubsetSpec:
    """Subset-size and search-effort configuration for MCD/MVE.

    h defaults to floor((n + p + 1) / 2) when left as None.
    """

    h: int | None = None
    n_starts: int = 500
    c_steps: int = 50
    seed: int = 0

    def resolve_h(self, n: int, p: int) -> int:
        h = self.h if self.h is not None else (n + p + 1) // 2
        if not p + 1 <= h <= n:
            raise InvalidInput(f"subset size h={h} outside [p+1={p + 1}, n={n}]")
        return h


@dataclass
class EllipsoidResult:
    """An exact minimum-volume ellipsoid over a finite-support law.

    ``shape_raw`` is the covering shape: every selected atom x satisfies
    (x - center)' shape_raw^{-1} (x - center) <= 1 (+1e-9).
    ``scatter = shape_raw * consistency_factor`` matches the covariance under
    multivariate normality.
    """

    center: np.ndarray
    shape_raw: np.ndarray
    covered_mass: float
    consistency_factor: float
    scatter: np.ndarray
    selected: tuple[int, ...]


def _mean_cov(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = pts.mean(axis=0)
    d = pts - c
    return c, matcore.sym_part(d.T @ d / pts.shape[0])


def _log_det_pd(m: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(m)
    if sign <= 0:
        raise np.linalg.LinAlgError("not positive definite")
    return float(logdet)


def mcd_consistency_factor(frac: float, p: int) -> float:
    """Multiplier making the h-subset covariance normal-consistent."""
    return float(frac / chi2.cdf(chi2.ppf(frac, p), p + 2))


def _c_step(x: np.ndarray, center, cov, h: int):
    a = matcore.invert(cov)
    d2 = matcore.mahalanobis_sq_rows(x, center, a)
    idx = np.argpartition(d2, h - 1)[:h]
    idx = np.sort(idx)
    c, v = _mean_cov(x[idx])
    return idx, c, v


def mcd(x, spec: SubsetSpec = SubsetSpec()) -> ScatterResult:
    """Minimum covariance determinant scatter via elemental starts + C-steps."""
    x = matcore.as_data_matrix(x)
    n, p = x.shape
    if n <= p:
        raise InvalidInput(f"MCD needs n > p, got n={n}, p={p}")
    h = spec.resolve_h(n, p)

    candidates = []
    for k in range(spec.n_starts):
        rng = np.random.default_rng(mix_seed(spec.seed, k))
        idx0 = rng.choice(n, size=p + 1, replace=False)
        c, v = _mean_cov(x[idx0])
        try:
            logdet = math.inf
            for _ in range(2):
                _, c, v = _c_step(x, c, v, h)
                logdet = _log_det_pd(v)
        except (np.linalg.LinAlgError, SingularMatrix):
            continue
        candidates.append((logdet, k, c, v))

    if not candidates:
        raise DegenerateSubset("every elemental start produced a singular subset")

    candidates.sort(key=lambda t: (t[0], t[1]))
    best = None
    for logdet, k, c, v in candidates[:10]:
        steps = 2
        try:
            while steps < spec.c_steps:
                _, c, v = _c_step(x, c, v, h)
                new_logdet = _log_det_pd(v)
                steps += 1
                improved = new_logdet < logdet - 1e-12
                logdet = new_logdet
                if not improved:
                    break
        except (np.linalg.LinAlgError, SingularMatrix):
            continue
        key = (logdet, k)
        if best is None or key < best[0]:
            best = (key, c, v, steps)

    if best is None:
        raise DegenerateSubset("no start produced a nonsingular h-subset")
    _, center, raw, steps = best
    factor = mcd_consistency_factor(h / n, p)
    return ScatterResult(
        scatter=matcore.sym_part(raw * factor),
        location=center,
        iterations=steps,
        converged=True,
        family_tag="MCD",
    )


def mvee(points: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000):
    """Minimum-volume enclosing ellipsoid of a point set.

    First-order barycentric ascent with away steps (Khachiyan-style; the
    away steps give the 1e-10 tolerance in a practical iteration count).
    Returns (center, shape_raw) with every point x satisfying
    (x - center)' shape_raw^{-1} (x - center) <= 1 + O(tol).
    """
    pts = np.asarray(points, dtype=float)
    m, p = pts.shape
    if m < p + 1:
        raise DegenerateSubset(f"need at least p+1={p + 1} points, got {m}")
    q = np.column_stack([pts, np.ones(m)])  # lifted points
    u = np.full(m, 1.0 / m)
    d = p + 1
    for _ in range(max_iter):
        xu = q.T @ (u[:, None] * q)
        try:
            mdist = np.einsum("ij,ij->i", q @ np.linalg.inv(xu), q)
        except np.linalg.LinAlgError:
            raise DegenerateSubset("degenerate point configuration") from None
        j_plus = int(np.argmax(mdist))
        eps_plus = mdist[j_plus] / d - 1.0
        support = u > 0
        j_minus = int(np.argmin(np.where(support, mdist, np.inf)))
        eps_minus = 1.0 - mdist[j_minus] / d
        if max(eps_plus, eps_minus) <= tol:
            break
        if eps_plus >= eps_minus:
            md = float(mdist[j_plus])
            lam = (md - d) / (d * (md - 1.0))
            u *= 1.0 - lam
            u[j_plus] += lam
        else:
            md = float(mdist[j_minus])
            cap = u[j_minus] / (1.0 - u[j_minus]) if u[j_minus] < 1.0 else 0.0
            lam = cap if md <= 1.0 else min((d - md) / (d * (md - 1.0)), cap)
            u *= 1.0 + lam
            u[j_minus] = max(u[j_minus] - lam, 0.0)
    center = u @ pts
    dev = pts - center
    core = matcore.sym_part(dev.T @ (u[:, None] * dev))
    shape_raw = matcore.sym_part(core * p)
    return center, shape_raw


def _coverage_count(x, center, shape_raw, slack=1e-9):
    a = matcore.invert(shape_raw)
    d2 = matcore.mahalanobis_sq_rows(x, center, a)
    return d2 <= 1.0 + slack


def _mve_exact(x: np.ndarray, h: int):
    n = x.shape[0]
    best = None
    for subset in itertools.combinations(range(n), h):
        pts = x[list(subset)]
        try:
            center, shape_raw = mvee(pts)
            logvol = _log_det_pd(shape_raw)
        except (DegenerateSubset, np.linalg.LinAlgError):
            continue
        if best is None or logvol < best[0] - 1e-15:
            best = (logvol, center, shape_raw)
    if best is None:
        raise DegenerateSubset("every h-subset is degenerate")
    return best[1], best[2]


def _subset_mvee(x: np.ndarray, subset: np.ndarray, tol: float = 1e-10):
    pts = np.unique(x[subset], axis=0)
    if pts.shape[0] < x.shape[1] + 1:
        pts = x[subset]
    return mvee(pts, tol=tol)


def _mve_concentrate(x: np.ndarray, subset: np.ndarray, h: int, max_steps: int):
    """Volume-monotone concentration: enclosing ellipsoid of the subset, then
    the h nearest points under its metric, repeated until stable. The h
    nearest points lie inside a shrunken copy of the current ellipsoid, so
    the next enclosing ellipsoid cannot have larger volume. Intermediate
    ellipsoids only rank distances and use a loose tolerance; the final
    shape is solved to full precision."""
    center, shape_raw = _subset_mvee(x, subset, tol=1e-4)
    for _ in range(max_steps):
        d2 = matcore.mahalanobis_sq_rows(x, center, matcore.invert(shape_raw))
        new_subset = np.sort(np.argsort(d2, kind="stable")[:h])
        if np.array_equal(new_subset, subset):
            break
        subset = new_subset
        center, shape_raw = _subset_mvee(x, subset, tol=1e-4)
    return _subset_mvee(x, subset)


def _mve_elemental(x: np.ndarray, h: int, spec: SubsetSpec):
    n, p = x.shape
    best = None
    for k in range(spec.n_starts):
        rng = np.random.default_rng(mix_seed(spec.seed, k))
        idx0 = rng.choice(n, size=p + 1, replace=False)
        c, v = _mean_cov(x[idx0])
        try:
            a = matcore.invert(v)
        except SingularMatrix:
            continue
        d2 = matcore.mahalanobis_sq_rows(x, c, a)
        m2 = np.partition(d2, h - 1)[h - 1]
        if m2 <= 0:
            continue
        logvol = _log_det_pd(v) + p * math.log(m2)
        if best is None or logvol < best[0] - 1e-15:
            order = np.argsort(d2, kind="stable")[:h]
            best = (logvol, np.sort(order))
    if best is None:
        raise DegenerateSubset("every elemental start was degenerate")
    return _mve_concentrate(x, best[1], h, spec.c_steps)


def mve(x, spec: SubsetSpec = SubsetSpec(), method: str = "auto") -> ScatterResult:
    """Minimum volume ellipsoid scatter covering at least h points.

    Exhaustive over h-subsets for n <= 20 (or method="exact"); otherwise
    elemental starts followed by volume-monotone concentration steps on the
    best candidate's h-subset. The raw covering shape is divided by the
    chi2_p quantile at h/n so the estimator matches the covariance for
    normal data.
    """
    x = matcore.as_data_matrix(x)
    n, p = x.shape
    if n <= p:
        raise InvalidInput(f"MVE needs n > p, got n={n}, p={p}")
    h = spec.resolve_h(n, p)
    if method not in ("auto", "exact", "elemental"):
        raise InvalidInput(f"unknown MVE method {method!r}")
    if method == "exact" and n > 20:
        raise Unsupported(f"exact MVE enumeration is capped at n=20, got n={n}")
    use_exact = method == "exact" or (method == "auto" and n <= 20)
    if use_exact:
        center, shape_raw = _mve_exact(x, h)
    else:
        center, shape_raw = _mve_elemental(x, h, spec)
    # normal-consistency rescaling is undefined at h = n (quantile at mass 1);
    # the raw covering shape is returned unscaled in that corner case
    quantile = float(chi2.ppf(h / n, p)) if h < n else 1.0
    return ScatterResult(
        scatter=matcore.sym_part(shape_raw / quantile),
        location=center,
        iterations=0,
        converged=True,
        family_tag="MVE",
    )


def mve_raw_shape(x, spec: SubsetSpec = SubsetSpec(), method: str = "auto"):
    """Covering (un-rescaled) MVE shape and center; helper for tests/CLI."""
    res = mve(x, spec, method)
    n, p = matcore.as_data_matrix(x).shape
    h = spec.resolve_h(n, p)
    quantile = float(chi2.ppf(h / n, p)) if h < n else 1.0
    return res.location, res.scatter * quantile


def population_mve(atoms, h: float) -> EllipsoidResult:
    """Exact population MVE of a finite-support law at mass fraction h.

    Enumerates inclusion-minimal atom subsets with mass >= h and returns the
    global minimum-volume enclosing ellipsoid. Supports at most 20 atoms.
    """
    pts = np.asarray([np.asarray(a, dtype=float).ravel() for a, _ in atoms])
    probs = np.asarray([float(q) for _, q in atoms])
    m, p = pts.shape
    if m > MAX_POPULATION_ATOMS:
        raise Unsupported(f"population MVE supports at most {MAX_POPULATION_ATOMS} atoms")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise InvalidInput("atom probabilities must be nonnegative and sum to 1")
    if not 0.0 < h < 1.0:
        raise InvalidInput(f"mass fraction h must be in (0, 1), got {h}")

    best = None
    saw_degenerate = False
    for mask in range(1, 1 << m):
        members = [i for i in range(m) if mask >> i & 1]
        mass = probs[members].sum()
        if mass < h:
            continue
        # inclusion-minimal: dropping the lightest member must fall below h
        if mass - probs[members].min() >= h:
            continue
        sub = pts[members]
        centered = sub - sub.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-12) < p:
            saw_degenerate = True
            continue
        center, shape_raw = mvee(sub)
        logvol = _log_det_pd(shape_raw)
        if best is None or logvol < best[0] - 1e-12:
            best = (logvol, center, shape_raw, tuple(members))

    if saw_degenerate:
        # a flat subset already reaches the mass target: the functional is
        # degenerate (zero volume beats any proper ellipsoid)
        raise DegenerateSubset("a degenerate (flat) atom subset reaches mass h")
    if best is None:
        raise DegenerateSubset("no atom subset reaches mass h")
    _, center, shape_raw, members = best
    inside = _coverage_count(pts, center, shape_raw)
    covered_mass = float(probs[inside].sum())
    factor = 1.0 / float(chi2.ppf(h, p))
    return EllipsoidResult(
        center=center,
        shape_raw=shape_raw,
        covered_mass=covered_mass,
        consistency_factor=factor,
        scatter=matcore.sym_part(shape_raw * factor),
        selected=members,
    )
