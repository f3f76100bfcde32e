"""Exception types raised by pairfringe."""


class DomainError(ValueError):
    """An argument lies outside the domain of a physical formula."""


class ResolutionError(ValueError):
    """A sampling grid is too coarse (or too short) for the requested object."""


class DegenerateError(ValueError):
    """The input leaves nothing to analyse (e.g. an opaque barrier)."""


class ContractViolation(ValueError):
    """An input stream breaks an ordering or state precondition."""


class AnalysisError(RuntimeError):
    """A fit or scan cannot support the requested estimate."""


class QuadratureError(ArithmeticError):
    """Numerical integration did not converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
