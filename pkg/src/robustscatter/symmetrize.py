"""Pairwise-difference (symmetrized) versions of the scatter estimators.

The symmetrized version of an estimator applies it to all n(n-1)/2 pairwise
differences x_i - x_j (i > j), centered at the origin. Differences are never
materialized: the accumulation streams over row blocks through a kernel
backend (compiled or numpy). M-families iterate

    V <- (2 / (n(n-1))) sum_{i>j} w(d_ij' V^{-1} d_ij) d_ij d_ij'

where the per-i partial sums are independent, so blocks may run on worker
threads; a fixed block plan plus an ordered reduction makes the result
identical for any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from ._pairwise import (
    KIND_CAUCHY,
    KIND_CONST,
    KIND_HUBER,
    KIND_POWER,
    KIND_TYLER,
    pair_block_accum,
)
from .errors import ConvergenceFailure, DegenerateObservation, InvalidInput
from .scatter import (
    M_FAMILIES,
    ZERO_DIST_TOL,
    IRLSSettings,
    ScatterResult,
    ScatterSpec,
    huber_tuning,
    _apply_normalization,
)

DEFAULT_MEMORY_BUDGET = 1 << 30  # 1 GiB

_NAMED = {"sCAU": "m_cauchy", "sHUB": "m_huber", "sTYL": "tyler"}


@dataclass(frozen=True)
class SymmetrizedSpec:
    """A scatter family applied to all pairwise differences.

    The inner estimator is always evaluated with the origin as its fixed
    location (differences are centered by construction); supplying a nonzero
    inner fixed location is rejected.
    """

    inner: ScatterSpec
    parallel: bool = False
    threads: int = 0  # 0 = auto when parallel
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    def __post_init__(self):
        if self.inner.symmetrized:
            raise InvalidInput("inner spec of a SymmetrizedSpec must not itself be symmetrized")
        if self.inner.fixed_location is not None and any(
            v != 0.0 for v in self.inner.fixed_location
        ):
            raise InvalidInput("symmetrized estimation fixes the location at the origin")
        if self.memory_budget < (1 << 20):
            raise InvalidInput("memory budget below 1 MiB is not usable")

    @property
    def tag(self) -> str:
        return "s" + self.inner.tag


class PairDifferenceView:
    """Logical view of the n(n-1)/2 differences x_i - x_j for i > j.

    Only row-block index ranges are exposed; blocks are sized from the
    memory budget so the numpy backend's materialized difference block stays
    within bounds. The plan depends on (n, p, budget) only, never on thread
    count, which keeps parallel and serial runs bit-identical.
    """

    def __init__(self, x: np.ndarray, memory_budget: int = DEFAULT_MEMORY_BUDGET):
        self.x = x
        self.n, self.p = x.shape
        self.memory_budget = int(memory_budget)
        per_row = self.n * self.p * 8 * 5  # difference block + temporaries
        rows = int(self.memory_budget // max(per_row, 1))
        rows = max(16, min(rows, 1024))
        # keep enough blocks around for thread-level parallelism on large n
        rows = min(rows, max(32, -(-self.n // 16)))
        self.block_rows = max(1, rows)

    @property
    def n_pairs(self) -> int:
        return self.n * (self.n - 1) // 2

    def blocks(self) -> list[tuple[int, int]]:
        return [
            (s, min(s + self.block_rows, self.n))
            for s in range(0, self.n, self.block_rows)
        ]

    def materialize(self) -> np.ndarray:
        """Explicit difference matrix; refused when it would bust the budget."""
        if self.n_pairs * self.p * 8 > self.memory_budget:
            raise InvalidInput(
                f"materializing {self.n_pairs} differences exceeds the memory budget"
            )
        i, j = np.tril_indices(self.n, k=-1)
        return self.x[i, :] - self.x[j, :]


def _pair_pass(view, a, kind, coef, alpha, drop_tol, pool):
    args = [
        (view.x, a, i0, i1, kind, coef, alpha, drop_tol) for i0, i1 in view.blocks()
    ]
    if pool is None:
        parts = [pair_block_accum(*arg) for arg in args]
    else:
        parts = list(pool.map(lambda arg: pair_block_accum(*arg), args))
    s = np.zeros((view.p, view.p))
    wsum = 0.0
    used = 0
    dropped = 0
    for sb, wb, ub, db in parts:
        s += sb
        wsum += wb
        used += ub
        dropped += db
    return s, wsum, used, dropped


def symmetrized_estimate(x, spec: SymmetrizedSpec) -> ScatterResult:
    """Fit the symmetrized version of spec.inner on the pairwise differences.

    Equals the inner estimator applied to the materialized difference matrix
    with fixed location 0 (up to floating-point summation order). The result
    carries the zero vector as location with ``location_is_estimate=False``.
    """
    x = matcore.as_data_matrix(x)
    n, p = x.shape
    if n < 3:
        raise InvalidInput(f"symmetrized estimation needs n >= 3, got n={n}")
    inner = spec.inner
    view = PairDifferenceView(x, spec.memory_budget)
    n_pairs = view.n_pairs

    threads = 1
    if spec.parallel:
        threads = spec.threads if spec.threads > 0 else min(8, _cpu_count())
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        s0, _, _, _ = _pair_pass(view, np.eye(p), KIND_CONST, 1.0, 0.0, 0.0, pool)
        if not np.any(s0):
            raise DegenerateObservation("all pairwise differences are zero")
        moment = matcore.sym_part(s0 / n_pairs)

        if inner.family == "cov":
            return ScatterResult(
                scatter=moment,
                location=np.zeros(p),
                iterations=0,
                converged=True,
                family_tag="sCOV",
                location_is_estimate=False,
            )

        if inner.family == "wcov":
            alpha = float(inner.alpha)
            a = matcore.invert(moment)
            drop_tol = ZERO_DIST_TOL if alpha < 0 else 0.0
            s, _, used, dropped = _pair_pass(
                view, a, KIND_POWER, 0.0, alpha, drop_tol, pool
            )
            if used == 0:
                raise DegenerateObservation("all pairwise differences were dropped")
            return ScatterResult(
                scatter=matcore.sym_part(s / used),
                location=np.zeros(p),
                iterations=0,
                converged=True,
                family_tag=f"sWCOV({alpha:g})",
                n_dropped=dropped,
                location_is_estimate=False,
            )

        if inner.family not in M_FAMILIES:
            raise InvalidInput(f"family {inner.family!r} cannot be symmetrized here")

        settings = inner.irls
        normalization = settings.normalization
        if inner.family == "tyler" and normalization == "none":
            normalization = "trace_p"

        if inner.family == "m_cauchy":
            kind, coef, drop_tol = KIND_CAUCHY, p + 1.0, 0.0
        elif inner.family == "m_huber":
            c2, sigma2 = huber_tuning(p, inner.q)
            kind, coef, drop_tol = KIND_HUBER, c2, 0.0
        else:
            kind, coef, drop_tol = KIND_TYLER, float(p), ZERO_DIST_TOL

        v = _apply_normalization(moment, normalization)
        converged = False
        dropped = 0
        it = 0
        for it in range(1, settings.max_iter + 1):
            a = matcore.invert(v)
            s, _, used, dropped = _pair_pass(view, a, kind, coef, 0.0, drop_tol, pool)
            if used <= p:
                raise DegenerateObservation(
                    "too few non-degenerate pairwise differences"
                )
            if inner.family == "m_huber":
                v_new = s / (n_pairs * sigma2)
            elif inner.family == "m_cauchy":
                v_new = s / n_pairs
            else:
                v_new = s / used
            v_new = _apply_normalization(matcore.sym_part(v_new), normalization)
            if np.max(np.abs(v_new - v)) <= settings.tol * np.max(np.abs(v)):
                v = v_new
                converged = True
                break
            v = v_new

        result = ScatterResult(
            scatter=v,
            location=np.zeros(p),
            iterations=it,
            converged=converged,
            family_tag=spec.tag,
            n_dropped=dropped,
            location_is_estimate=False,
        )
        if not converged and settings.raise_on_failure:
            raise ConvergenceFailure(
                f"{spec.tag} did not converge within {settings.max_iter} iterations",
                result=result,
            )
        return result
    finally:
        if pool is not None:
            pool.shutdown()


def symmetrized_named(name: str, x, settings: IRLSSettings | None = None,
                      q: float = 0.7, **kwargs) -> ScatterResult:
    """Convenience dispatch for the named symmetrized estimators.

    sCAU / sHUB / sTYL map to symmetrized m_cauchy / m_huber / tyler
    (sTYL is Duembgen's shape matrix).
    """
    family = _NAMED.get(name)
    if family is None:
        raise InvalidInput(f"unknown symmetrized estimator {name!r};"
                           f" expected one of {sorted(_NAMED)}")
    inner = ScatterSpec(
        family=family, q=q, irls=settings if settings is not None else IRLSSettings()
    )
    return symmetrized_estimate(x, SymmetrizedSpec(inner=inner, **kwargs))


def _cpu_count() -> int:
    import os

    return os.cpu_count() or 1
