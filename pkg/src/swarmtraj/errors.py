"""Shared exception types."""


class ParameterError(ValueError):
    """Invalid argument values or inconsistent dimensions."""


class DomainError(ValueError):
    """Query outside the valid domain (e.g. time outside a trajectory span)."""


class GenerationError(RuntimeError):
    """World generation could not satisfy the requested configuration."""
