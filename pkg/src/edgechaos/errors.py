"""Exception hierarchy shared across the package."""


class EdgeChaosError(Exception):
    """Base class for all package errors."""


class DimensionError(EdgeChaosError, ValueError):
    """Array shapes do not match the operator or the layer chain."""


class NonFiniteError(EdgeChaosError, ValueError):
    """A NaN or Inf appeared where finite values are required."""


class WeightFormatError(EdgeChaosError, ValueError):
    """A weight file is malformed or does not describe an endomap."""


class InsufficientDataError(EdgeChaosError, ValueError):
    """Not enough samples / trajectory points for the requested analysis."""


class NumericalError(EdgeChaosError, ArithmeticError):
    """A numerical procedure failed (all samples diverged, no convergence, ...)."""


class ConvergenceError(NumericalError):
    """The eigenvalue iteration hit its cap without deflating."""


class IdxFormatError(EdgeChaosError, ValueError):
    """Base class for IDX parsing failures."""


class BadMagicError(IdxFormatError):
    pass


class TruncatedFileError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass
