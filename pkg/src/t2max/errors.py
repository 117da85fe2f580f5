"""Exception types shared across the package."""


class T2MaxError(Exception):
    """Base class for all t2max errors."""


class DomainError(T2MaxError):
    """A scalar argument is outside the mathematical domain of an operation."""


class InvalidInput(T2MaxError):
    """A structural precondition on shapes, sizes, or counts is violated."""


class NotPositiveDefinite(T2MaxError):
    """Cholesky factorization hit a non-positive pivot."""


class NotPSD(T2MaxError):
    """A matrix required to be positive semidefinite has a genuinely negative eigenvalue."""


class SingularScale(T2MaxError):
    """The pooled scale matrix of a test statistic is singular."""


class TailTooThin(T2MaxError):
    """A Monte-Carlo table is too small to resolve the requested tail probability."""


class MissingTable(T2MaxError):
    """No null table is available for a required (n1, n2, d) combination."""


class DimensionMismatch(T2MaxError):
    """Block dimensions do not agree where a uniform dimension is required."""


class InvalidGrid(T2MaxError):
    """A ratio-check grid point has too little expected tail mass to estimate."""


class DatasetFormatError(T2MaxError):
    """A dataset file failed validation; message cites the offending line."""


class ConfigError(T2MaxError):
    """A run-config document failed strict parsing."""
