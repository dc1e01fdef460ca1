"""Exception types shared across the package."""


class XorelayError(Exception):
    """Base class for package-specific errors."""


class InfeasibleActionError(XorelayError, ValueError):
    """An action was applied in a state where it is not allowed."""


class DegenerateParametersError(XorelayError, ValueError):
    """Arrival probabilities admit no closed-form stationary analysis.

    Raised for (p1, p2) in {(0, 0), (1, 1)}: the geometric ratio of the
    controlled chain is 0/0 there.  Callers should handle these corners
    directly (empty system / coded transmission every slot).
    """


class UnboundedThresholdSearchError(XorelayError, ValueError):
    """Threshold search has no finite bound (holding is free)."""


class ConvergenceError(XorelayError, RuntimeError):
    """An iterative solver exhausted its iteration budget.

    Carries the residual trajectory so callers can diagnose whether the
    tolerance was simply too tight or the iteration is not contracting.
    """

    def __init__(self, message: str, residuals: list[float] | None = None):
        super().__init__(message)
        self.residuals = residuals or []

    @property
    def last_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


class SimplexError(XorelayError, RuntimeError):
    """The LP solver failed (cycling guard, infeasibility, unboundedness)."""


class UnsupportedMetricError(XorelayError, ValueError):
    """A report does not carry the requested metric."""
