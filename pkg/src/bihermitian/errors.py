"""Exception types shared across the package."""


class BihermitianError(Exception):
    """Base class for all package errors."""


class GridMismatchError(BihermitianError):
    """Two fields live on different grids."""


class PositivityError(BihermitianError):
    """A form that must be positive has a non-positive component."""


class PluriclosedError(BihermitianError):
    """A form that must be pluriclosed fails the residual gate."""


class IncompatibleDataError(BihermitianError):
    """Right-hand side violates the solvability condition."""


class DegenerateBasisError(BihermitianError):
    """Basis forms have (numerically) zero pairing."""


class NotInConeError(BihermitianError):
    """A class lies outside the positive cone."""


class ConfigurationError(BihermitianError):
    """Problem data is inconsistent (exponents, signs, weights)."""


class SolverFailure(BihermitianError):
    """An iterative solver did not converge.

    Parameters
    ----------
    message : str
        Human readable reason.
    history : list of float, optional
        Residual history up to the failure.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])
