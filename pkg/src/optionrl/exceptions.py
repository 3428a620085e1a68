class ConfigurationError(ValueError):
    """Bad shapes, names or hyperparameter values."""


class UsageError(RuntimeError):
    """An object was driven in an invalid order (e.g. step after done)."""


class NumericalDegeneracyError(ArithmeticError):
    """A recursion or loss produced a non-finite or vanishing quantity."""


class InternalConsistencyError(AssertionError):
    """A quantity that must be normalized by construction was not."""
