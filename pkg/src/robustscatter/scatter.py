"""Classical and M-type scatter/shape estimators behind one contract.

All estimators accept an optional fixed location; M-estimation runs a plain
IRLS fixed-point iteration. Families:

    cov       sample covariance (divisor n), location = sample mean
    wcov      weighted covariance E(r^alpha dd'), r the Mahalanobis distance
              with respect to the sample covariance
    m_cauchy  elliptical-Cauchy MLE weights w(s) = (p+1)/(1+s), location
              iterated jointly unless fixed
    m_huber   w(s) = min(1, c^2/s)/sigma^2 with c^2 the chi2_p quantile at q
              and sigma^2 the constant making E[w(d^2) d^2] = p under N(0, I);
              plug-in location (sample mean unless fixed)
    tyler     distribution-free shape, w(s) = p/s, plug-in location, trace
              normalized to p
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import chi2

from . import matcore
from .errors import (
    ConvergenceFailure,
    DegenerateObservation,
    InvalidInput,
    SingularMatrix,
)

M_FAMILIES = ("m_cauchy", "m_huber", "tyler")
FAMILIES = ("cov", "wcov") + M_FAMILIES

# Squared distances at or below this are treated as "observation at the
# location" for weight functions singular at zero.
ZERO_DIST_TOL = 1e-24


@dataclass(frozen=True)
class IRLSSettings:
    """Stopping rules and normalization for the IRLS fixed-point iteration."""

    max_iter: int = 500
    tol: float = 1e-8
    normalization: str = "none"  # none | trace_p | det_1
    raise_on_failure: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise InvalidInput(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidInput(f"max_iter must be >= 1, got {self.max_iter}")
        if self.normalization not in ("none", "trace_p", "det_1"):
            raise InvalidInput(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class ScatterSpec:
    """Declarative choice of a scatter estimator.

    ``alpha`` applies to wcov, ``q`` to m_huber. ``symmetrized=True`` routes
    through the pairwise-difference version (see the symmetrize module).
    """

    family: str
    alpha: float | None = None
    q: float = 0.7
    symmetrized: bool = False
    fixed_location: tuple | None = None
    irls: IRLSSettings = field(default_factory=IRLSSettings)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInput(f"unknown family {self.family!r}")
        if self.family == "wcov":
            if self.alpha is None or not np.isfinite(self.alpha):
                raise InvalidInput("wcov needs a finite alpha")
        if self.family == "m_huber" and not 0.0 < self.q < 1.0:
            raise InvalidInput(f"huber tuning q must be in (0, 1), got {self.q}")
        if self.fixed_location is not None:
            object.__setattr__(
                self, "fixed_location", tuple(float(v) for v in self.fixed_location)
            )

    @property
    def tag(self) -> str:
        base = {
            "cov": "COV",
            "m_cauchy": "CAU",
            "m_huber": "HUB",
            "tyler": "TYL",
        }.get(self.family)
        if base is None:
            base = f"WCOV({self.alpha:g})"
        return ("s" + base) if self.symmetrized else base


@dataclass
class ScatterResult:
    """A fitted scatter/shape matrix plus convergence metadata.

    ``location_is_estimate`` distinguishes a genuine location estimate from
    the zero placeholder that pairwise-difference estimators carry.
    """

    scatter: np.ndarray
    location: np.ndarray | None
    iterations: int
    converged: bool
    family_tag: str
    n_dropped: int = 0
    location_is_estimate: bool = True


def _resolve_location(x: np.ndarray, fixed_location) -> tuple[np.ndarray, bool]:
    if fixed_location is None:
        return x.mean(axis=0), False
    t = np.asarray(fixed_location, dtype=float).ravel()
    if t.shape[0] != x.shape[1]:
        raise InvalidInput(
            f"fixed location has dimension {t.shape[0]}, data has {x.shape[1]}"
        )
    return t, True


def _apply_normalization(v: np.ndarray, normalization: str) -> np.ndarray:
    p = v.shape[0]
    if normalization == "trace_p":
        tr = np.trace(v)
        if tr <= 0:
            raise SingularMatrix("cannot trace-normalize a non-positive matrix")
        return v * (p / tr)
    if normalization == "det_1":
        sign, logdet = np.linalg.slogdet(v)
        if sign <= 0:
            raise SingularMatrix("cannot det-normalize a non-positive matrix")
        return v * np.exp(-logdet / p)
    return v


def sample_cov(x, fixed_location=None) -> ScatterResult:
    """Sample covariance with divisor n; centers at the mean unless fixed."""
    x = matcore.as_data_matrix(x)
    t, _ = _resolve_location(x, fixed_location)
    d = x - t
    v = matcore.sym_part(d.T @ d / x.shape[0])
    return ScatterResult(
        scatter=v,
        location=t,
        iterations=0,
        converged=True,
        family_tag="COV",
    )


def wcov(x, alpha: float, fixed_location=None) -> ScatterResult:
    """Weighted covariance: average of r^alpha dd' with Mahalanobis r.

    alpha = 0 reproduces the sample covariance exactly. For alpha < 0,
    observations at the center (d^2 <= 1e-24) are dropped and counted.
    """
    x = matcore.as_data_matrix(x)
    n, p = x.shape
    if n <= p:
        raise InvalidInput(f"wcov needs n > p, got n={n}, p={p}")
    if not np.isfinite(alpha):
        raise InvalidInput(f"alpha must be finite, got {alpha}")
    t, _ = _resolve_location(x, fixed_location)
    d = x - t
    ref = matcore.sym_part(d.T @ d / n)
    a = matcore.invert(ref)  # SingularMatrix if the sample cov is singular
    d2 = np.maximum(np.einsum("ij,jk,ik->i", d, a, d), 0.0)
    keep = np.ones(n, dtype=bool)
    if alpha < 0:
        keep = d2 > ZERO_DIST_TOL
        if not np.any(keep):
            raise DegenerateObservation("all observations sit at the location")
    w = np.zeros(n)
    w[keep] = d2[keep] ** (0.5 * alpha)
    dk = d[keep]
    v = matcore.sym_part(dk.T @ (w[keep, None] * dk) / int(keep.sum()))
    return ScatterResult(
        scatter=v,
        location=t,
        iterations=0,
        converged=True,
        family_tag=f"WCOV({alpha:g})",
        n_dropped=int(n - keep.sum()),
    )


def exact_wcov(atoms, alpha: float) -> np.ndarray:
    """Population weighted covariance of a finite-support law by enumeration.

    ``atoms`` is a sequence of (p-vector, probability) pairs. Mahalanobis
    distances are taken with respect to the population covariance, which must
    be nonsingular. Serves as the oracle for the sample version.
    """
    pts = np.asarray([np.asarray(a, dtype=float).ravel() for a, _ in atoms])
    probs = np.asarray([float(q) for _, q in atoms])
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise InvalidInput("probabilities must be nonnegative and sum to 1")
    mu = probs @ pts
    d = pts - mu
    cov = matcore.sym_part(d.T @ (probs[:, None] * d))
    a = matcore.invert(cov)  # SingularMatrix if population cov singular
    d2 = np.maximum(np.einsum("ij,jk,ik->i", d, a, d), 0.0)
    if alpha < 0:
        keep = d2 > ZERO_DIST_TOL
        pk = probs[keep] / probs[keep].sum()
        d, d2, probs = d[keep], d2[keep], pk
    w = probs * d2 ** (0.5 * alpha) if alpha != 0 else probs
    return matcore.sym_part(d.T @ (w[:, None] * d))


def huber_tuning(p: int, q: float) -> tuple[float, float]:
    """Huber cutoff c^2 (chi2_p quantile at q) and consistency constant sigma^2.

    sigma^2 solves E[min(1, c^2/s) s] = p sigma^2 for s ~ chi2_p, in closed
    form through the chi2_{p+2} distribution function.
    """
    if not 0.0 < q < 1.0:
        raise InvalidInput(f"q must be in (0, 1), got {q}")
    c2 = float(chi2.ppf(q, p))
    sigma2 = float(chi2.cdf(c2, p + 2) + (c2 / p) * (1.0 - chi2.cdf(c2, p)))
    return c2, sigma2


def _m_weights(family: str, d2: np.ndarray, p: int, c2: float, sigma2: float):
    if family == "m_cauchy":
        return (p + 1.0) / (1.0 + d2)
    if family == "m_huber":
        return np.where(d2 <= c2, 1.0, c2 / np.where(d2 > 0, d2, 1.0)) / sigma2
    # tyler; caller guarantees d2 > 0
    return p / d2


def m_estimate(x, spec: ScatterSpec) -> ScatterResult:
    """IRLS fit of an M-estimator of scatter (m_cauchy, m_huber, tyler).

    Iterates V <- (1/n) sum w(d_i^2) (x_i - t)(x_i - t)' until the relative
    max-norm change falls below the tolerance. m_cauchy updates the location
    jointly (weighted mean) unless a fixed location is given; m_huber and
    tyler use a plug-in location (sample mean unless fixed); tyler is
    trace-normalized to p.
    """
    if spec.family not in M_FAMILIES:
        raise InvalidInput(f"m_estimate got non-M family {spec.family!r}")
    x = matcore.as_data_matrix(x)
    n, p = x.shape
    if n <= p:
        raise InvalidInput(f"M-estimation needs n > p, got n={n}, p={p}")

    settings = spec.irls
    normalization = settings.normalization
    if spec.family == "tyler" and normalization == "none":
        normalization = "trace_p"

    t, fixed = _resolve_location(x, spec.fixed_location)
    free_loc = spec.family == "m_cauchy" and not fixed

    c2 = sigma2 = 0.0
    if spec.family == "m_huber":
        c2, sigma2 = huber_tuning(p, spec.q)

    dev = x - t
    v = matcore.sym_part(dev.T @ dev / n)
    try:
        matcore.invert(v)
    except SingularMatrix:
        v = np.eye(p)
    v = _apply_normalization(v, normalization)

    converged = False
    n_dropped = 0
    it = 0
    for it in range(1, settings.max_iter + 1):
        a = matcore.invert(v)
        d2 = np.maximum(np.einsum("ij,jk,ik->i", x - t, a, x - t), 0.0)
        keep = slice(None)
        if spec.family == "tyler":
            mask = d2 > ZERO_DIST_TOL
            n_dropped = int(n - mask.sum())
            if int(mask.sum()) <= p:
                raise DegenerateObservation(
                    "too many observations coincide with the location"
                )
            keep = mask
        w = _m_weights(spec.family, d2[keep], p, c2, sigma2)
        if free_loc:
            u = 1.0 / (1.0 + d2)
            t_new = (u[:, None] * x).sum(axis=0) / u.sum()
        else:
            t_new = t
        dev = x[keep] - t_new
        v_new = matcore.sym_part(dev.T @ (w[:, None] * dev) / dev.shape[0])
        v_new = _apply_normalization(v_new, normalization)

        v_scale = np.max(np.abs(v))
        step_ok = np.max(np.abs(v_new - v)) <= settings.tol * v_scale
        if free_loc:
            step_ok = step_ok and np.max(np.abs(t_new - t)) <= settings.tol * (
                1.0 + np.max(np.abs(t))
            )
        v, t = v_new, t_new
        if step_ok:
            converged = True
            break

    result = ScatterResult(
        scatter=v,
        location=t,
        iterations=it,
        converged=converged,
        family_tag=spec.tag,
        n_dropped=n_dropped,
    )
    if not converged and settings.raise_on_failure:
        raise ConvergenceFailure(
            f"{spec.tag} did not converge within {settings.max_iter} iterations",
            result=result,
        )
    return result


def fit_plain(x, spec: ScatterSpec) -> ScatterResult:
    """Dispatch a non-symmetrized ScatterSpec to its family implementation."""
    if spec.symmetrized:
        raise InvalidInput("fit_plain cannot handle symmetrized specs")
    if spec.family == "cov":
        return sample_cov(x, fixed_location=spec.fixed_location)
    if spec.family == "wcov":
        return wcov(x, spec.alpha, fixed_location=spec.fixed_location)
    return m_estimate(x, spec)
