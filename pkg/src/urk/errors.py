"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates a documented constraint."""


class FormatError(ValueError):
    """Serialized input is malformed or inconsistent."""


class DecodeLimitError(RuntimeError):
    """An exhaustive search would exceed the configured work limit."""
