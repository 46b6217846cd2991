"""Exception hierarchy shared by all freeprobe modules.

Configuration problems (bad inputs, schema violations) and numerical
problems (failed convergence, branch selection, precision loss) are kept
on separate branches so the CLI can map them to distinct exit codes.
"""


class FreeprobeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FreeprobeError):
    """Invalid configuration or argument values (CLI exit code 2)."""


class NumericError(FreeprobeError):
    """Numerical failure in a computation (CLI exit code 3)."""


class SizeLimitError(ConfigError):
    """An enumeration or order cap was exceeded."""


class ArityError(ConfigError):
    """A sequence is too short for the requested order."""


class InsufficientDataError(ConfigError):
    """Too few samples for the requested estimator."""


class DomainError(NumericError):
    """Evaluation point lies outside the function's domain."""


class PoleError(NumericError):
    """Evaluation at a pole (k = 0 of the Blue's function, etc.)."""


class BranchError(NumericError):
    """Argument belongs to the other branch of a two-branch function.

    ``redirect`` names the operation the caller should use instead.
    """

    def __init__(self, message, redirect=None):
        super().__init__(message)
        self.redirect = redirect


class ConvergenceError(NumericError):
    """An iterative solver failed to converge."""


class ModelError(NumericError):
    """The model assumptions are violated (e.g. negative density)."""


class PrecisionError(NumericError):
    """A computation cannot reach the requested accuracy."""


class DegeneracyError(NumericError):
    """Degenerate input (e.g. coincident eigenvalues)."""


class EdgeError(NumericError):
    """Evaluation at or beyond a spectral edge where a quantity degenerates."""


class MatchingError(NumericError):
    """Coupling-matching iteration failed to converge."""
