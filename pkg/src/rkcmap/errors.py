"""Exception types shared across the package."""


class RKCError(Exception):
    """Base class for all package errors."""


class EvaluationError(RKCError, ValueError):
    """A metric or field evaluated to a non-finite value."""


class ChartExitError(RKCError):
    """A geodesic left the coordinate chart."""

    def __init__(self, message, exit_time):
        super().__init__(message)
        self.exit_time = exit_time


class NoConvergenceError(RKCError):
    """An iterative geometric solve (shooting) did not converge."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class SolverError(RKCError):
    """The energy minimizer failed (line search breakdown)."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ContinuationError(RKCError):
    """Homotopy continuation exhausted its bisection budget."""

    def __init__(self, message, t, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class ValidationError(RKCError, ValueError):
    """Invalid configuration or input; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
