"""Pure-numpy backend for the pairwise-difference accumulation kernel.

Semantics are identical to the compiled backend in ``_pairwise_c``: for rows
i in [i0, i1) and all j < i, accumulate w(s_ij) * d_ij d_ij' where
d_ij = x_i - x_j and s_ij = d_ij' a d_ij. Differences are formed first so
results depend on the data only through the pairwise differences.

Weight kinds (must stay in sync with the compiled backend):
    0  const   w = 1
    1  cauchy  w = coef / (1 + s)
    2  huber   w = 1 if s <= coef else coef / s      (coef is c^2, unscaled)
    3  tyler   w = coef / s                          (coef is p)
    4  power   w = s ** (alpha / 2)

Pairs with s <= drop_tol are skipped and counted when drop_tol > 0.
"""

from __future__ import annotations

import numpy as np


def _weights(kind: int, coef: float, alpha: float, s: np.ndarray, valid: np.ndarray):
    if kind == 0:
        return np.ones_like(s)
    if kind == 1:
        return coef / (1.0 + s)
    if kind == 2:
        return np.where(s <= coef, 1.0, coef / np.where(s > 0, s, 1.0))
    if kind == 3:
        w = np.zeros_like(s)
        np.divide(coef, s, out=w, where=valid & (s > 0))
        return w
    if kind == 4:
        w = np.zeros_like(s)
        np.power(s, 0.5 * alpha, out=w, where=valid & (s > 0))
        if alpha >= 0:
            w[valid & (s == 0.0)] = 1.0 if alpha == 0 else 0.0
        return w
    raise ValueError(f"unknown weight kind {kind}")


def pair_block_accum(x, a, i0, i1, kind, coef, alpha, drop_tol):
    """Accumulate weighted outer products of pairwise differences.

    Returns (S, wsum, used, dropped) with S the p×p weighted sum over the
    pairs {(i, j): i0 <= i < i1, j < i}.
    """
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    n, p = x.shape
    b = i1 - i0
    if b <= 0 or i1 <= 1:
        return np.zeros((p, p)), 0.0, 0, 0
    d = x[i0:i1, None, :] - x[None, :i1, :]  # (b, i1, p)
    dr = d.reshape(-1, p)
    s = np.einsum("ij,ij->i", dr @ a, dr).reshape(b, i1)
    np.maximum(s, 0.0, out=s)
    valid = np.arange(i1)[None, :] < np.arange(i0, i1)[:, None]
    dropped = 0
    if drop_tol > 0.0:
        drop = valid & (s <= drop_tol)
        dropped = int(np.count_nonzero(drop))
        valid = valid & ~drop
    w = _weights(kind, coef, alpha, s, valid)
    w = np.where(valid, w, 0.0).reshape(-1)
    out = dr.T @ (w[:, None] * dr)
    out = 0.5 * (out + out.T)
    return out, float(w.sum()), int(np.count_nonzero(valid)), dropped
