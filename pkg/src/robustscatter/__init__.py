"""Robust scatter/shape estimation, pairwise-difference symmetrization, and
covariance plug-in multivariate methods (two-scatter ICA, observational
regression, plug-in partial correlation), with a reproducible Monte Carlo
harness."""

from ._pairwise import BACKEND as kernel_backend
from .errors import (
    ConvergenceFailure,
    DegenerateObservation,
    DegenerateScale,
    DegenerateSubset,
    InvalidInput,
    RobustScatterError,
    SingularMatrix,
    TieWarning,
    Unsupported,
)
from .estimators import Estimator, as_estimator, estimate, make_estimator
from .matcore import (
    eig_sym,
    inv_sqrt,
    invert,
    mahalanobis_sq,
    pseudo_correlation,
    pseudo_correlation_matrix,
)
from .plugin import (
    PartialCorrelationResult,
    RegressionResult,
    UnmixingResult,
    md_index,
    observational_regression,
    partial_correlation,
    two_scatter_ica,
)
from .randgen import (
    DistributionSpec,
    chisq_std,
    discrete,
    elliptical_t,
    ess_sample,
    exponential_std,
    independent_product,
    lognormal_std,
    mix_seed,
    multivariate_normal,
    sample,
    standard_normal,
)
from .scatter import (
    IRLSSettings,
    ScatterResult,
    ScatterSpec,
    exact_wcov,
    huber_tuning,
    m_estimate,
    sample_cov,
    wcov,
)
from .subset_scatter import EllipsoidResult, SubsetSpec, mcd, mve, population_mve
from .symmetrize import (
    PairDifferenceView,
    SymmetrizedSpec,
    symmetrized_estimate,
    symmetrized_named,
)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "__version__",
    # errors
    "RobustScatterError",
    "InvalidInput",
    "SingularMatrix",
    "DegenerateScale",
    "DegenerateObservation",
    "DegenerateSubset",
    "Unsupported",
    "ConvergenceFailure",
    "TieWarning",
    # matrix primitives
    "eig_sym",
    "inv_sqrt",
    "invert",
    "mahalanobis_sq",
    "pseudo_correlation",
    "pseudo_correlation_matrix",
    # sampling
    "DistributionSpec",
    "standard_normal",
    "chisq_std",
    "lognormal_std",
    "exponential_std",
    "discrete",
    "multivariate_normal",
    "elliptical_t",
    "sample",
    "independent_product",
    "ess_sample",
    "mix_seed",
    # scatter estimators
    "ScatterSpec",
    "IRLSSettings",
    "ScatterResult",
    "sample_cov",
    "wcov",
    "exact_wcov",
    "m_estimate",
    "huber_tuning",
    "SubsetSpec",
    "EllipsoidResult",
    "mcd",
    "mve",
    "population_mve",
    "SymmetrizedSpec",
    "PairDifferenceView",
    "symmetrized_estimate",
    "symmetrized_named",
    "Estimator",
    "estimate",
    "make_estimator",
    "as_estimator",
    # plug-in methods
    "UnmixingResult",
    "RegressionResult",
    "PartialCorrelationResult",
    "two_scatter_ica",
    "md_index",
    "observational_regression",
    "partial_correlation",
]
