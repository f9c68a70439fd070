"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ShapeError(ValueError):
    """Array dimensions do not line up."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge or to bracket a root."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        msg = super().__str__()
        if self.diagnostics:
            details = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
            msg = f"{msg} ({details})"
        return msg


class ConfigError(ValueError):
    """A scenario or codebook specification is invalid or infeasible."""
