"""Exception and warning types shared by all estimator modules."""


class RobustScatterError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(RobustScatterError, ValueError):
    """Malformed input: wrong shape, non-finite entries, bad parameters."""


class SingularMatrix(RobustScatterError):
    """A matrix required to be positive definite is (numerically) singular."""


class DegenerateScale(RobustScatterError):
    """A diagonal scatter entry needed for normalization is not positive."""


class DegenerateObservation(RobustScatterError):
    """Too many observations coincide with the location for the estimator."""


class DegenerateSubset(RobustScatterError):
    """No non-degenerate subset could be found by a subset estimator."""


class Unsupported(RobustScatterError):
    """The request exceeds an implementation bound (e.g. enumeration size)."""


class ConvergenceFailure(RobustScatterError):
    """Raised on demand when IRLS fails to converge; carries the last iterate.

    The offending partial result is available as ``.result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TieWarning(UserWarning):
    """Eigenvalue ties make a component ordering ambiguous."""
