"""Shared exception types."""


class InvalidInputError(ValueError):
    """Raised when an operation receives input violating its contract."""
