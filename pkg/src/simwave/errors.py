"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConfigError(ValueError):
    """A configuration value is malformed or violates an invariant.

    ``key`` names the offending (dotted) configuration key when known.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class NumericalError(FloatingPointError):
    """Training produced a non-finite loss; ``partial`` holds the history so far."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
