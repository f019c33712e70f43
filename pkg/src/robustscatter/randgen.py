"""Deterministic, seedable sampling for every distribution the experiments use.

Streams are derived with a SplitMix64-style hash so replication r of an
experiment draws from ``mix_seed(seed, r)`` and replications can run in any
order (or concurrently) with identical output. The underlying generator is
numpy's PCG64 via ``default_rng``; normal variates therefore use numpy's
ziggurat. Streams are bit-reproducible for a fixed numpy version; exact
cross-language reproducibility is out of scope.

Continuous univariate kinds are standardized affinely to mean 0, variance 1:

    chisq_std(k):       (chi2_k - k) / sqrt(2k)
    lognormal_std(s):   (exp(sZ) - exp(s^2/2)) / sqrt((exp(s^2)-1) exp(s^2))
    exponential_std:    E - 1            (unit-rate E)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import InvalidInput

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix_fin(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, stream: int) -> int:
    """Derive the 64-bit seed of substream `stream` from a master seed."""
    if not 0 <= int(seed) < (1 << 64):
        raise InvalidInput(f"seed must be a 64-bit unsigned integer, got {seed}")
    if stream < 0:
        raise InvalidInput(f"stream index must be nonnegative, got {stream}")
    return _splitmix_fin(int(seed) + (int(stream) + 1) * _GOLDEN)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & _MASK64)


@dataclass(frozen=True)
class DistributionSpec:
    """Declarative choice of a sampling distribution.

    Univariate kinds have dim 1; multivariate kinds infer dim from their
    parameters. Use the module-level factory functions rather than building
    instances by hand.
    """

    kind: str
    df: float | None = None
    sigma: float | None = None
    atoms: tuple = ()
    probs: tuple = ()
    mu: tuple = ()
    matrix: tuple = field(default=())  # row tuples of sigma/gamma

    @property
    def dim(self) -> int:
        if self.kind in ("multivariate_normal", "elliptical_t"):
            return len(self.mu)
        if self.kind == "discrete" and self.atoms and hasattr(self.atoms[0], "__len__"):
            return len(self.atoms[0])
        return 1


def standard_normal() -> DistributionSpec:
    return DistributionSpec("standard_normal")


def chisq_std(df: float) -> DistributionSpec:
    """Chi-square with df degrees of freedom, standardized to mean 0, var 1."""
    if df <= 0:
        raise InvalidInput(f"chisq_std needs df > 0, got {df}")
    return DistributionSpec("chisq_std", df=float(df))


def lognormal_std(sigma: float = 1.0) -> DistributionSpec:
    """Log-normal with shape parameter sigma, standardized to mean 0, var 1."""
    if sigma <= 0:
        raise InvalidInput(f"lognormal_std needs sigma > 0, got {sigma}")
    return DistributionSpec("lognormal_std", sigma=float(sigma))


def exponential_std() -> DistributionSpec:
    """Unit-rate exponential shifted to mean 0 (variance is already 1)."""
    return DistributionSpec("exponential_std")


def discrete(atoms, probs) -> DistributionSpec:
    """Finite-support distribution; atoms may be scalars or p-vectors."""
    probs_t = tuple(float(q) for q in probs)
    if len(atoms) != len(probs_t) or not atoms:
        raise InvalidInput("atoms and probs must be equal-length and non-empty")
    if any(q < 0 for q in probs_t) or abs(sum(probs_t) - 1.0) > 1e-12:
        raise InvalidInput("probs must be nonnegative and sum to 1 within 1e-12")
    first = atoms[0]
    if hasattr(first, "__len__"):
        atoms_t = tuple(tuple(float(v) for v in a) for a in atoms)
    else:
        atoms_t = tuple(float(a) for a in atoms)
    return DistributionSpec("discrete", atoms=atoms_t, probs=probs_t)


def multivariate_normal(mu, sigma) -> DistributionSpec:
    m = np.asarray(mu, dtype=float).ravel()
    s = matcore.as_sym_matrix(sigma)
    if s.shape[0] != m.shape[0]:
        raise InvalidInput("mu and sigma dimensions disagree")
    try:
        np.linalg.cholesky(s + 1e-14 * np.trace(s) * np.eye(len(m)))
    except np.linalg.LinAlgError:
        raise InvalidInput("sigma must be positive semi-definite") from None
    return DistributionSpec(
        "multivariate_normal", mu=tuple(m), matrix=tuple(map(tuple, s))
    )


def elliptical_t(df: float, mu, gamma) -> DistributionSpec:
    """Elliptical t with df degrees of freedom; df=1 is the elliptical Cauchy."""
    if df <= 0:
        raise InvalidInput(f"elliptical_t needs df > 0, got {df}")
    m = np.asarray(mu, dtype=float).ravel()
    g = matcore.as_sym_matrix(gamma)
    if g.shape[0] != m.shape[0]:
        raise InvalidInput("mu and gamma dimensions disagree")
    matcore.invert(g)  # raises SingularMatrix if not PD; surface as InvalidInput
    return DistributionSpec(
        "elliptical_t", df=float(df), mu=tuple(m), matrix=tuple(map(tuple, g))
    )


def _draw(spec: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    kind = spec.kind
    if kind == "standard_normal":
        return rng.standard_normal(n)[:, None]
    if kind == "chisq_std":
        return ((rng.chisquare(spec.df, n) - spec.df) / math.sqrt(2 * spec.df))[:, None]
    if kind == "lognormal_std":
        s = spec.sigma
        z = rng.standard_normal(n)
        shift = math.exp(s * s / 2.0)
        scale = math.sqrt((math.exp(s * s) - 1.0) * math.exp(s * s))
        return ((np.exp(s * z) - shift) / scale)[:, None]
    if kind == "exponential_std":
        return (rng.exponential(1.0, n) - 1.0)[:, None]
    if kind == "discrete":
        idx = rng.choice(len(spec.probs), size=n, p=np.asarray(spec.probs))
        atoms = np.atleast_2d(np.asarray(spec.atoms, dtype=float))
        if atoms.shape[0] == 1 and len(spec.probs) > 1:
            atoms = atoms.T
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        return atoms[idx].reshape(n, -1)
    if kind == "multivariate_normal":
        s = np.asarray(spec.matrix, dtype=float)
        mu = np.asarray(spec.mu, dtype=float)
        vals, vecs = matcore.eig_sym(s)
        root = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
        z = rng.standard_normal((n, len(mu)))
        return mu + z @ root
    if kind == "elliptical_t":
        g = np.asarray(spec.matrix, dtype=float)
        mu = np.asarray(spec.mu, dtype=float)
        omega = matcore.sqrt_sym(g)
        z = rng.standard_normal((n, len(mu)))
        r = np.sqrt(rng.chisquare(spec.df, n) / spec.df)
        return mu + (z / r[:, None]) @ omega
    raise InvalidInput(f"unknown distribution kind {kind!r}")


def sample(spec: DistributionSpec, n: int, seed: int) -> np.ndarray:
    """Draw n rows from spec; same (spec, n, seed) gives identical output."""
    if n < 1:
        raise InvalidInput(f"sample size must be >= 1, got {n}")
    return _draw(spec, n, _rng(seed))


def independent_product(specs, n: int, seed: int) -> np.ndarray:
    """n×p matrix whose column j is i.i.d. from specs[j], columns independent."""
    if n < 1:
        raise InvalidInput(f"sample size must be >= 1, got {n}")
    if not specs:
        raise InvalidInput("need at least one column spec")
    rng = _rng(seed)
    cols = []
    for spec in specs:
        if spec.dim != 1:
            raise InvalidInput("independent_product takes univariate specs only")
        cols.append(_draw(spec, n, rng)[:, 0])
    return np.column_stack(cols)


# Exchangeable sign-symmetric base distributions for ess_sample.
_ESS_KINDS = ("normal", "t", "uniform")


def ess_sample(
    f_kind: str,
    omega,
    mu,
    n: int,
    seed: int,
    df: float | None = None,
) -> np.ndarray:
    """Sample x = Omega y + mu with y exchangeable sign-symmetric about 0.

    Implemented bases: spherical normal ("normal"), spherical t with df
    degrees of freedom ("t", normal rows divided by sqrt(chi2_df/df)), and
    an i.i.d. symmetric uniform product ("uniform", each coordinate uniform
    on [-sqrt(3), sqrt(3)]).
    """
    if f_kind not in _ESS_KINDS:
        raise InvalidInput(f"f_kind must be one of {_ESS_KINDS}, got {f_kind!r}")
    if n < 1:
        raise InvalidInput(f"sample size must be >= 1, got {n}")
    om = np.asarray(omega, dtype=float)
    m = np.asarray(mu, dtype=float).ravel()
    if om.ndim != 2 or om.shape[0] != om.shape[1] or om.shape[0] != m.shape[0]:
        raise InvalidInput("omega must be square and match mu")
    if np.linalg.matrix_rank(om) < om.shape[0]:
        raise InvalidInput("omega must be full rank")
    p = om.shape[0]
    rng = _rng(seed)
    if f_kind == "normal":
        y = rng.standard_normal((n, p))
    elif f_kind == "t":
        if df is None or df <= 0:
            raise InvalidInput("spherical t base needs df > 0")
        y = rng.standard_normal((n, p))
        y /= np.sqrt(rng.chisquare(df, n) / df)[:, None]
    else:
        y = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=(n, p))
    return y @ om.T + m
