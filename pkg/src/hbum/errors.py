"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: validation problems exit 2,
numerical degeneracy exits 3, file and format problems exit 4.
"""


class HbumError(Exception):
    """Base class for all package errors."""


class ValidationError(HbumError):
    """A configuration, argument or data invariant was violated."""


class InvalidParameterError(ValidationError):
    """A distribution was called with parameters outside its domain."""


class GenerationError(ValidationError):
    """A synthetic-data constraint could not be satisfied."""


class NumericalDegeneracyError(HbumError):
    """A sampling step became numerically degenerate (singular posterior,
    all-zero categorical weights, failed Cholesky factorization)."""


class DataFormatError(HbumError):
    """An on-disk file is missing, truncated, corrupted or malformed."""
