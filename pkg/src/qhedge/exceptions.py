"""Exception types shared across the package."""


class QHedgeError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(QHedgeError, ValueError):
    """Malformed or non-finite input to a numerical routine."""


class InvalidStateError(QHedgeError, ValueError):
    """A state variable left its admissible set (e.g. price <= 0, variance <= 0)."""


class DegenerateModelError(QHedgeError):
    """A weighted second-moment matrix is singular, so the one-period
    regression that defines the hedge is ill-posed.

    Carries optional period/state context so solver failures can be located.
    """

    def __init__(self, message, period=None, state=None):
        ctx = []
        if period is not None:
            ctx.append(f"period {period}")
        if state is not None:
            ctx.append(f"state {state}")
        if ctx:
            message = f"{message} ({', '.join(ctx)})"
        super().__init__(message)
        self.period = period
        self.state = state


class WeightBoundsError(QHedgeError):
    """The one-period weight gamma left (0, 1], violating the standing
    hypothesis that makes the backward recursion well defined."""

    def __init__(self, message, period=None, state=None):
        ctx = []
        if period is not None:
            ctx.append(f"period {period}")
        if state is not None:
            ctx.append(f"state {state}")
        if ctx:
            message = f"{message} ({', '.join(ctx)})"
        super().__init__(message)
        self.period = period
        self.state = state


class ConfigError(QHedgeError, ValueError):
    """Invalid experiment configuration (schema or semantic)."""


class StaleTablesError(QHedgeError):
    """Policy tables were produced under a different model/solver configuration."""
