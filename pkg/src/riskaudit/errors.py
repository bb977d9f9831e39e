"""Exception hierarchy shared across the toolkit."""


class RiskAuditError(Exception):
    """Base class for all toolkit errors."""


class InputError(RiskAuditError, ValueError):
    """Malformed or inconsistent input (shapes, probabilities, unknown ids)."""


class DomainError(InputError):
    """A utility function was evaluated outside its domain."""


class UnsupportedMethodError(RiskAuditError):
    """The requested estimation method is not available for a mechanism."""


class ConvergenceError(RiskAuditError, RuntimeError):
    """The welfare optimizer hit its iteration cap before converging."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class InstanceError(InputError):
    """Diagnostic raised while parsing an instance file.

    ``code`` is a stable machine-readable identifier such as
    ``"prior-not-normalized"``; ``where`` locates the problem (a JSON field
    path, or ``line N`` for syntax errors).
    """

    def __init__(self, code, message, where=""):
        self.code = code
        self.where = where
        loc = f" at {where}" if where else ""
        super().__init__(f"[{code}]{loc}: {message}")
