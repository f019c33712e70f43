"""Covariance plug-in multivariate methods, generic over any scatter estimator.

Three methods share the same pattern — estimate a (joint) scatter, then read
the quantity of interest off the matrix:

  * two-scatter ICA: whiten with V1, rotate by the eigenvectors of V2 on the
    whitened data; with (cov, wcov_2) this is the classical FOBI method.
  * observational regression: slopes from partitions of a joint scatter,
    B = V_xx^{-1} V_xy.
  * partial correlation: normalized off-diagonal of the precision matrix.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import InvalidInput, TieWarning, Unsupported
from .estimators import as_estimator
from .scatter import ScatterResult

MD_MAX_DIM = 8
EIGEN_TIE_TOL = 1e-10


@dataclass
class UnmixingResult:
    """Two-scatter ICA output.

    Rows of W are ordered by descending eigenvalue of the second scatter on
    whitened data, each row sign-fixed so its largest-magnitude entry is
    positive.
    """

    W: np.ndarray
    whitener: np.ndarray
    kurtosis_eigenvalues: np.ndarray
    v1_tag: str
    v2_tag: str


@dataclass
class RegressionResult:
    """Slope matrix and intercept recovered from a joint scatter.

    ``alpha`` is None when the scatter carries no location estimate (the
    intercept is then not identified without a separate location spec).
    """

    B: np.ndarray
    alpha: np.ndarray | None
    v_xx: np.ndarray
    v_xy: np.ndarray
    v_yy: np.ndarray
    tag: str


@dataclass
class PartialCorrelationResult:
    """Plug-in partial correlation of the first two coordinates given the rest.

    ``rho`` comes from the precision matrix; ``rho_conditional`` recomputes it
    through the conditional-covariance (Schur complement) route — the two are
    algebraically identical and serve as a mutual numerical check.
    """

    rho: float
    rho_conditional: float
    precision_entries: tuple[float, float, float]  # v11, v12, v22
    scatter: np.ndarray
    tag: str
    result: ScatterResult


def two_scatter_ica(x, v1, v2) -> UnmixingResult:
    """ICA from two scatter estimates: whiten with V1, rotate by PCA of V2.

    The data are centered at V1's own location estimate when it carries one,
    otherwise at the column means. Warns (TieWarning) when eigenvalues of the
    second scatter tie within 1e-10, which leaves the component order
    ambiguous.
    """
    x = matcore.as_data_matrix(x)
    if x.shape[1] < 2:
        raise InvalidInput("ICA needs at least two coordinates")
    est1, est2 = as_estimator(v1), as_estimator(v2)
    r1 = est1.fit(x)
    whitener = matcore.inv_sqrt(r1.scatter)
    center = (
        r1.location
        if r1.location is not None and r1.location_is_estimate
        else x.mean(axis=0)
    )
    y = (x - center) @ whitener
    r2 = est2.fit(y)
    vals, vecs = matcore.eig_sym(r2.scatter)
    gaps = np.abs(np.diff(vals))
    if np.any(gaps <= EIGEN_TIE_TOL * max(1.0, abs(float(vals[0])))):
        warnings.warn(
            "second-scatter eigenvalues tie within tolerance; component order "
            "is ambiguous",
            TieWarning,
            stacklevel=2,
        )
    w = vecs.T @ whitener
    for i in range(w.shape[0]):
        k = int(np.argmax(np.abs(w[i])))
        if w[i, k] < 0:
            w[i] = -w[i]
    return UnmixingResult(
        W=w,
        whitener=whitener,
        kurtosis_eigenvalues=vals,
        v1_tag=est1.tag,
        v2_tag=est2.tag,
    )


def md_index(g) -> float:
    """Minimum-distance index of a gain matrix G = W A, in [0, 1].

    Zero means W recovers the mixing up to permutation and scaling. The inner
    minimization over the diagonal is solved per row in closed form; the
    permutation is found by exhaustive search (dimension capped at 8).
    """
    a = np.asarray(g, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"gain matrix must be square, got shape {a.shape}")
    p = a.shape[0]
    if p < 2:
        raise InvalidInput("minimum-distance index needs dimension >= 2")
    if p > MD_MAX_DIM:
        raise Unsupported(f"exhaustive assignment is capped at dimension {MD_MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("gain matrix contains non-finite entries")
    row_norms = (a * a).sum(axis=1)
    if np.any(row_norms == 0.0):
        raise InvalidInput("gain matrix has a zero row")
    ghat = (a * a) / row_norms[:, None]
    best = 0.0
    for perm in itertools.permutations(range(p)):
        s = 0.0
        for i, j in enumerate(perm):
            s += ghat[i, j]
        if s > best:
            best = s
    return float(np.sqrt(max(p - best, 0.0) / (p - 1)))


def observational_regression(x, y, spec) -> RegressionResult:
    """Regression slopes from partitions of a joint scatter on z = (x, y).

    B = V_xx^{-1} V_xy; the intercept is mu_y - B' mu_x when the estimator
    carries a location, otherwise None.
    """
    x = matcore.as_data_matrix(x)
    yv = np.asarray(y, dtype=float)
    if yv.ndim == 1:
        yv = yv[:, None]
    if yv.shape[0] != x.shape[0]:
        raise InvalidInput("x and y must have the same number of rows")
    p, q = x.shape[1], yv.shape[1]
    est = as_estimator(spec)
    res = est.fit(np.hstack([x, yv]))
    v = res.scatter
    v_xx = v[:p, :p]
    v_xy = v[:p, p:]
    v_yy = v[p:, p:]
    b = matcore.invert(v_xx) @ v_xy
    alpha = None
    if res.location is not None and res.location_is_estimate:
        mu_x = res.location[:p]
        mu_y = res.location[p:]
        alpha = mu_y - b.T @ mu_x
    return RegressionResult(B=b, alpha=alpha, v_xx=v_xx, v_xy=v_xy, v_yy=v_yy,
                            tag=est.tag)


def partial_correlation(u, v, x, spec) -> PartialCorrelationResult:
    """Plug-in partial correlation of u and v given the columns of x.

    rho = -K_12 / sqrt(K_11 K_22) with K the inverse of the joint scatter of
    z = (u, v, x). The conditional-covariance route is evaluated as well; the
    two agree to numerical precision for any positive-definite scatter.
    """
    uv = np.asarray(u, dtype=float).ravel()
    vv = np.asarray(v, dtype=float).ravel()
    xm = matcore.as_data_matrix(x)
    if uv.shape[0] != xm.shape[0] or vv.shape[0] != xm.shape[0]:
        raise InvalidInput("u, v and x must have the same number of rows")
    z = np.column_stack([uv, vv, xm])
    if z.shape[1] < 3:
        raise InvalidInput("partial correlation needs at least one conditioning column")
    est = as_estimator(spec)
    res = est.fit(z)
    k = matcore.invert(res.scatter)
    rho = float(-k[0, 1] / np.sqrt(k[0, 0] * k[1, 1]))

    s = res.scatter
    syy = s[:2, :2]
    syx = s[:2, 2:]
    sxx = s[2:, 2:]
    cond = matcore.sym_part(syy - syx @ matcore.invert(sxx) @ syx.T)
    rho_cond = float(cond[0, 1] / np.sqrt(cond[0, 0] * cond[1, 1]))

    return PartialCorrelationResult(
        rho=rho,
        rho_conditional=rho_cond,
        precision_entries=(float(k[0, 0]), float(k[0, 1]), float(k[1, 1])),
        scatter=res.scatter,
        tag=est.tag,
        result=res,
    )
