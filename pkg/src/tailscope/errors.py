"""Exception types shared across tailscope modules."""


class TailscopeError(Exception):
    """Base class for all tailscope errors."""


class InvalidGridError(TailscopeError, ValueError):
    """A stepsize grid violates its construction constraints."""


class SingularParameterError(TailscopeError, ValueError):
    """A closed-form expression is singular at this parameter value.

    Raised e.g. for the folded-chain stationary formula at p = 1/2,
    where the algebraic form breaks down although the chain itself is
    perfectly ergodic. Callers should fall back to ``linear_solve``.
    """


class NonreturnError(TailscopeError, RuntimeError):
    """A regeneration path exceeded the hard step cap without returning."""


class ConfigError(TailscopeError, ValueError):
    """Invalid configuration (missing keys, bad values, parse failures)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(TailscopeError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class OutOfDomainError(TailscopeError, ValueError):
    """The two-state closed form is invalid at the evaluated exponent.

    Carries the offending exponent in ``s``.
    """

    def __init__(self, message, s):
        super().__init__(f"{message} (at s={s})")
        self.s = s


class DivergenceError(TailscopeError, ArithmeticError):
    """The hitting-time linear system has no finite solution (h = infinity)."""


class NoStationarySolutionError(TailscopeError, RuntimeError):
    """Refusal: the Lyapunov diagnostic is not negative.

    The tail-index characterization requires a contractive regime; with
    rho >= 0 there is no stationary heavy-tailed solution to report.
    """


class RootAboveCapError(TailscopeError, RuntimeError):
    """The moment kernel stays at or below 1 on the whole search range."""


class SizeError(TailscopeError, ValueError):
    """Not enough samples for the requested estimator configuration."""


class UnsupportedScheduleError(TailscopeError, TypeError):
    """The operation is not defined for this schedule variant."""
