"""Shared exception types."""


class ParameterError(ValueError):
    """A parameter violates a model precondition."""


class ConfigurationError(ValueError):
    """A run configuration is malformed or inconsistent."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its accuracy target."""
