"""Exception hierarchy shared across the package.

Validation problems (bad configuration, rejected matrices, malformed
files) map to CLI exit code 2; numeric failures map to exit code 1.
"""


class ValidationError(ValueError):
    """Input or configuration rejected before any computation ran."""


class SpectrumError(ValidationError):
    """Scaling matrix violates the eigenvalue constraint min Re(lambda) > 1."""


class ConfigError(ValidationError):
    """Inconsistent component wiring (e.g. scale function vs operator)."""


class NumericError(RuntimeError):
    """A numerical routine failed to converge or left its validated range."""


class RangeError(NumericError):
    """Argument outside the representable range (overflow in matrix power)."""


class MatrixNotPSDError(NumericError):
    """Covariance factorization failed even after jitter escalation."""

    def __init__(self, msg: str, min_eigenvalue: float):
        super().__init__(msg)
        self.min_eigenvalue = min_eigenvalue
