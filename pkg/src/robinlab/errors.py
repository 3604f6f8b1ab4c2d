"""Exception hierarchy."""


class RobinLabError(Exception):
    """Base class for all library errors."""


class ConfigError(RobinLabError, ValueError):
    """Malformed surface or run configuration."""


class UnsupportedDimension(RobinLabError, ValueError):
    pass


class SingularLattice(RobinLabError, ValueError):
    pass


class TruncationTooLargeForGrid(RobinLabError, ValueError):
    pass


class SBelowOne(RobinLabError, ValueError):
    pass


class DiagonalPoint(RobinLabError, ValueError):
    pass


class ZeroMass(RobinLabError, ValueError):
    pass


class NonpositiveF(RobinLabError, ValueError):
    pass


class ConcentratedInput(RobinLabError, ValueError):
    pass


class NumericalInstability(RobinLabError, ArithmeticError):
    """Base for failures of an iterative or extrapolating numerical scheme."""


class ExtrapolationUnstable(NumericalInstability):
    pass


class LineSearchFailed(NumericalInstability):
    pass


class InequalityViolated(RobinLabError, AssertionError):
    """A verified inequality failed; ``witness`` holds the offending field."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
