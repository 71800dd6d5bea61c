"""Shared exception types."""


class ParameterError(ValueError):
    """An argument or configuration value violates a documented precondition."""


class NoConvergedPointError(LookupError):
    """A sweep slice holds no converged row to pick an optimum from."""
