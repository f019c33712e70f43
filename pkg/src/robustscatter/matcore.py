"""Dense symmetric-matrix primitives every estimator builds on.

Eigendecomposition, symmetric inverse square root, inversion, quadratic
forms and pseudo-correlation extraction, all on plain float64 ndarrays.
Positive-definiteness checks use a relative threshold so they are
scale-free.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateScale, InvalidInput, SingularMatrix

# Relative eigenvalue threshold below which a matrix counts as singular.
REL_PD_TOL = 1e-12


def as_data_matrix(x, min_rows: int = 2) -> np.ndarray:
    """Validate and return an n×p float64 sample matrix (C-contiguous)."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidInput(f"data matrix must be 2-D, got ndim={a.ndim}")
    n, p = a.shape
    if n < min_rows or p < 1:
        raise InvalidInput(f"need at least {min_rows} rows and 1 column, got {n}x{p}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("data matrix contains non-finite entries")
    return a


def as_sym_matrix(m) -> np.ndarray:
    """Validate a square symmetric matrix; returns an exactly symmetric copy."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix contains non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale > 0 and np.max(np.abs(a - a.T)) > 1e-8 * scale:
        raise InvalidInput("matrix is not symmetric")
    return sym_part(a)


def sym_part(a: np.ndarray) -> np.ndarray:
    """Exactly symmetric average of a and its transpose."""
    return 0.5 * (a + a.T)


def eig_sym(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues descending, eigenvectors as columns). Each
    eigenvector is sign-fixed so its largest-magnitude entry is positive,
    which makes downstream component orderings deterministic.
    """
    a = as_sym_matrix(m)
    vals, vecs = np.linalg.eigh(a)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        k = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[k, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


def _pd_eig(m, what: str) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = eig_sym(m)
    tol = REL_PD_TOL * max(1.0, float(vals[0])) if vals.size else 0.0
    if vals.size == 0 or vals[-1] <= tol:
        raise SingularMatrix(
            f"{what}: smallest eigenvalue {vals[-1] if vals.size else 'n/a'} "
            f"below tolerance {tol}"
        )
    return vals, vecs


def inv_sqrt(m) -> np.ndarray:
    """Inverse of the unique symmetric positive-definite square root."""
    vals, vecs = _pd_eig(m, "inv_sqrt")
    return sym_part((vecs / np.sqrt(vals)) @ vecs.T)


def sqrt_sym(m) -> np.ndarray:
    """Unique symmetric positive-definite square root."""
    vals, vecs = _pd_eig(m, "sqrt_sym")
    return sym_part((vecs * np.sqrt(vals)) @ vecs.T)


def invert(m) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix."""
    vals, vecs = _pd_eig(m, "invert")
    return sym_part((vecs / vals) @ vecs.T)


def pseudo_correlation(v, j: int, k: int) -> float:
    """Off-diagonal of a scatter normalized by its diagonal entries.

    Scale-free: invariant under v -> c*v for c > 0.
    """
    a = as_sym_matrix(v)
    p = a.shape[0]
    if not (0 <= j < p and 0 <= k < p):
        raise InvalidInput(f"indices ({j},{k}) out of range for dimension {p}")
    djj, dkk = a[j, j], a[k, k]
    if djj <= 0 or dkk <= 0:
        raise DegenerateScale(f"non-positive diagonal entries ({djj}, {dkk})")
    return float(a[j, k] / np.sqrt(djj * dkk))


def pseudo_correlation_matrix(v) -> np.ndarray:
    """Full pseudo-correlation matrix of a scatter (unit diagonal)."""
    a = as_sym_matrix(v)
    d = np.diag(a)
    if np.any(d <= 0):
        raise DegenerateScale("non-positive diagonal entry")
    s = 1.0 / np.sqrt(d)
    return sym_part(a * np.outer(s, s))


def mahalanobis_sq(x, center, v_inv) -> float:
    """Squared Mahalanobis distance (x-center)' v_inv (x-center)."""
    xv = np.asarray(x, dtype=np.float64).ravel()
    cv = np.asarray(center, dtype=np.float64).ravel()
    a = as_sym_matrix(v_inv)
    if xv.shape != cv.shape or xv.shape[0] != a.shape[0]:
        raise InvalidInput(
            f"dimension mismatch: x {xv.shape}, center {cv.shape}, matrix {a.shape}"
        )
    d = xv - cv
    return max(float(d @ a @ d), 0.0)


def mahalanobis_sq_rows(x: np.ndarray, center, v_inv) -> np.ndarray:
    """Row-wise squared Mahalanobis distances of an n×p matrix."""
    a = as_sym_matrix(v_inv)
    d = np.asarray(x, dtype=np.float64) - np.asarray(center, dtype=np.float64)
    if d.shape[1] != a.shape[0]:
        raise InvalidInput("dimension mismatch between rows and matrix")
    return np.maximum(np.einsum("ij,jk,ik->i", d, a, d), 0.0)
