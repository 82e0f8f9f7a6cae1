"""Exception types shared across the toolkit.

DomainError and UsageError subclass ValueError so the estimator classes
stay compatible with scikit-learn error-handling conventions.
"""


class PassvizError(Exception):
    """Base class for all toolkit errors."""


class UsageError(PassvizError, ValueError):
    """Bad invocation: unknown format tag, unknown file extension, bad flag."""


class DomainError(PassvizError, ValueError):
    """Input violates an operation's domain (empty corpus, k > M, ...)."""


class NumericalError(PassvizError, RuntimeError):
    """Non-finite values during optimisation; carries the iteration index."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class SchemaVersionError(PassvizError, ValueError):
    """Serialized artefact carries an unsupported schema version."""
