"""Shared exception types."""


class BudgetError(RuntimeError):
    """An operation would exceed its configured compute/memory budget."""


class ConfigError(ValueError):
    """An experiment configuration is invalid."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class HypothesisError(ValueError):
    """Inputs violate the hypotheses of the requested bound/formula."""
