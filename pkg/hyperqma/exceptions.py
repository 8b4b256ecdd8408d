"""
exceptions.py

Exceptions raised across the hyperqma package. The CLI maps them onto exit codes:
configuration problems exit with 2, failed checks with 1 and solver
non-convergence with 3.
"""


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConeError(ValueError):
    """An eigenvalue tuple lies outside the admissible cone of an operator."""


class PairingError(ValueError):
    """The 2n-spectrum of a hermitian pencil failed to split into pairs."""


class PositivityError(ValueError):
    """A form that must be positive semidefinite is not."""


class NormalizationError(RuntimeError):
    """A right hand side family could not be matched to its target norm."""


class ClaimError(RuntimeError):
    """The auxiliary comparison function has the wrong sign somewhere."""


class SolverDivergence(RuntimeError):
    """
    Newton iteration failed to converge.

    Attributes:
        residual (float): Sup-norm residual at the last accepted iterate.
        iterations (int): Number of Newton steps taken.
    """

    def __init__(self, message: str, residual: float, iterations: int):
        self.reason = message
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")

    def __reduce__(self):
        return self.__class__, (self.reason, self.residual, self.iterations)
