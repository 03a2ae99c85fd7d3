"""Exception taxonomy shared across the package.

Domain violations (bad arguments, regimes the theory excludes) are
``ValueError`` subclasses so they behave naturally in library use.
``NumericalError`` is reserved for failures of an otherwise valid
computation (non-convergence, singular Gram matrices) and carries the
module and operation names for diagnostics; the CLI maps it to exit
code 3, and config problems to exit code 2.
"""

from __future__ import annotations


class DomainError(ValueError):
    """An argument violates a documented precondition."""


class OutOfRegimeError(DomainError):
    """The requested regime is outside the theory (e.g. gamma <= 1)."""


class DegenerateSpectrumError(DomainError):
    """A spectral measure with no strictly positive atom was supplied."""


class NoPopulationSpectrumError(DomainError):
    """A sample-based preconditioner has no limiting population spectrum.

    Both sample kinds (pseudo-inverse and damped inverse of X^T X)
    converge to the plain gradient-descent interpolant; callers that
    want their asymptotics should use the Identity kind explicitly.
    """


class NumericalError(RuntimeError):
    """A numerical routine failed; records where and the last residual."""

    def __init__(self, module: str, operation: str, message: str,
                 residual: float | None = None):
        self.module = module
        self.operation = operation
        self.residual = residual
        detail = f"{module}.{operation}: {message}"
        if residual is not None:
            detail += f" (last residual {residual:.3e})"
        super().__init__(detail)


class ConfigError(ValueError):
    """An experiment configuration failed validation.

    ``path`` locates the offending field with dotted/indexed notation,
    e.g. ``"preconditioners[2].alpha"``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class UnknownExperimentError(ConfigError):
    """An experiment name that is not a registered preset."""

    def __init__(self, name: str, suggestion: str | None = None):
        self.name = name
        self.suggestion = suggestion
        msg = f"unknown experiment {name!r}"
        if suggestion:
            msg += f"; did you mean {suggestion!r}?"
        super().__init__("experiment", msg)
