class InputError(ValueError):
    """Invalid model, parameter or configuration supplied by the caller."""


class NumericError(RuntimeError):
    """A numerical procedure failed (pole collision, non-convergence, ...)."""
