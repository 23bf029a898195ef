"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data violates a documented invariant or precondition."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (blow-up, non-convergence, breakdown)."""


class DegenerateWarning(UserWarning):
    """Output is well defined but degenerate (e.g. a zero half-line measure)."""
