"""Exception hierarchy shared across the package."""


class DrBayesError(Exception):
    """Base class for all package errors."""


class SchemaError(DrBayesError):
    """A required column is missing or the column config is malformed."""


class ValidationError(DrBayesError):
    """Data violates an invariant (non-binary outcome, NaN covariate, ...)."""


class ParseError(DrBayesError):
    """A cell could not be parsed as a number."""


class ConfigurationError(DrBayesError):
    """Invalid run configuration (bad sizes, modes, counts)."""


class DegenerateSampleError(DrBayesError):
    """An operation produced an empty or degenerate sample."""


class NumericError(DrBayesError):
    """A numeric routine failed (non-finite values, singular matrix)."""


class FailureBudgetExceeded(DrBayesError):
    """Too many replications or draws failed to converge."""
