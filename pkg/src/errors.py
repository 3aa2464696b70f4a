"""Exception hierarchy shared by the numerical modules and the CLI."""


class TradeoffError(Exception):
    """Base class for every error raised by this package."""


class LayoutError(TradeoffError, ValueError):
    """Unknown label, bad permutation, or incompatible tensor factors."""


class NotHermitianError(TradeoffError, ValueError):
    pass


class NotPSDError(TradeoffError, ValueError):
    pass


class NotUnitaryError(TradeoffError, ValueError):
    pass


class ConstraintError(TradeoffError, ValueError):
    """Parameters off the x² + y² + 2xy/d = 1 constraint or out of range."""


class CombNormalizationError(TradeoffError, ValueError):
    """A comb failed its normalization ladder; carries the failing level."""

    def __init__(self, message, level=None, residual=None):
        super().__init__(message)
        self.level = level
        self.residual = residual


class ChainMismatchError(TradeoffError, ValueError):
    pass


class DominanceError(TradeoffError, ValueError):
    pass


class DegenerateEigenError(TradeoffError, ArithmeticError):
    pass


class PipelineMismatchError(TradeoffError, ArithmeticError):
    """Two independent constructions of the same quantity disagree."""


class UsageError(TradeoffError, ValueError):
    """Invalid command-line configuration (exit code 2)."""


class EnvelopeError(TradeoffError, ArithmeticError):
    """A proposal density exceeded the rejection-sampling envelope."""
