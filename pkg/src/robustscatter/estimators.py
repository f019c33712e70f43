"""Estimator dispatch: one entry point for every scatter family by spec or name.

The plug-in methods and the experiment harness are estimator-generic; they
accept anything `as_estimator` understands — a ScatterSpec (optionally
symmetrized), a SymmetrizedSpec, a subset estimator name, an Estimator, or a
bare callable returning a ScatterResult.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import InvalidInput
from .scatter import IRLSSettings, ScatterResult, ScatterSpec, fit_plain
from .subset_scatter import SubsetSpec, mcd, mve
from .symmetrize import DEFAULT_MEMORY_BUDGET, SymmetrizedSpec, symmetrized_estimate


@dataclass(frozen=True)
class Estimator:
    """A named scatter estimator: tag plus a fit function on data matrices."""

    tag: str
    fit: Callable[[np.ndarray], ScatterResult]


def estimate(x, spec: ScatterSpec, *, parallel: bool = False, threads: int = 0,
             memory_budget: int = DEFAULT_MEMORY_BUDGET) -> ScatterResult:
    """Fit a ScatterSpec, routing symmetrized specs through pair differences."""
    if spec.symmetrized:
        inner = replace(spec, symmetrized=False, fixed_location=None)
        return symmetrized_estimate(
            x,
            SymmetrizedSpec(
                inner=inner,
                parallel=parallel,
                threads=threads,
                memory_budget=memory_budget,
            ),
        )
    return fit_plain(x, spec)


_CORE_NAMES = {
    "cov": ("cov", False),
    "cau": ("m_cauchy", False),
    "cauchy": ("m_cauchy", False),
    "scau": ("m_cauchy", True),
    "hub": ("m_huber", False),
    "huber": ("m_huber", False),
    "shub": ("m_huber", True),
    "tyl": ("tyler", False),
    "tyler": ("tyler", False),
    "styl": ("tyler", True),
    "scov": ("cov", True),
    "swcov": ("wcov", True),
    "wcov": ("wcov", False),
}


def make_estimator(
    name: str,
    *,
    alpha: float | None = None,
    q: float = 0.7,
    h: int | None = None,
    n_starts: int = 500,
    c_steps: int = 50,
    subset_seed: int = 0,
    irls: IRLSSettings | None = None,
    parallel: bool = False,
    threads: int = 0,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> Estimator:
    """Build a named estimator (paper-style or lowercase names accepted)."""
    key = name.strip().lower()
    irls = irls if irls is not None else IRLSSettings()
    if key in ("mve", "mcd"):
        spec = SubsetSpec(h=h, n_starts=n_starts, c_steps=c_steps, seed=subset_seed)
        fit = (lambda x, s=spec: mve(x, s)) if key == "mve" else (
            lambda x, s=spec: mcd(x, s)
        )
        return Estimator(tag=key.upper(), fit=fit)
    if key not in _CORE_NAMES:
        raise InvalidInput(f"unknown estimator name {name!r}")
    family, symmetrized = _CORE_NAMES[key]
    if family == "wcov" and alpha is None:
        raise InvalidInput(f"estimator {name!r} needs alpha")
    spec = ScatterSpec(
        family=family, alpha=alpha, q=q, symmetrized=symmetrized, irls=irls
    )
    return Estimator(
        tag=spec.tag,
        fit=lambda x, s=spec: estimate(
            x, s, parallel=parallel, threads=threads, memory_budget=memory_budget
        ),
    )


def as_estimator(obj) -> Estimator:
    """Normalize any accepted estimator description to an Estimator."""
    if isinstance(obj, Estimator):
        return obj
    if isinstance(obj, ScatterSpec):
        return Estimator(tag=obj.tag, fit=lambda x, s=obj: estimate(x, s))
    if isinstance(obj, SymmetrizedSpec):
        return Estimator(tag=obj.tag, fit=lambda x, s=obj: symmetrized_estimate(x, s))
    if isinstance(obj, str):
        return make_estimator(obj)
    if callable(obj):
        tag = getattr(obj, "__name__", "custom")
        return Estimator(tag=tag, fit=obj)
    raise InvalidInput(f"cannot interpret {obj!r} as a scatter estimator")
