"""Error types raised by divgrid operations."""


class DivgridError(Exception):
    """Base class; CLI maps these to exit code 1 with the class name echoed."""


class EmptyMask(DivgridError):
    pass


class BasepointOutside(DivgridError):
    pass


class CellOutside(DivgridError):
    pass


class DimensionTooSmall(DivgridError):
    pass


class NonpositiveRadius(DivgridError):
    pass


class AtomOutside(DivgridError):
    pass


class BadTau(DivgridError):
    pass


class BadAngle(DivgridError):
    pass


class InfeasibleSpec(DivgridError):
    pass


class EmptyDomain(DivgridError):
    pass


class UncoveredPoint(DivgridError):
    pass


class Unbalanced(DivgridError):
    pass


class DisconnectedImbalance(Unbalanced):
    pass


class NotADipole(DivgridError):
    pass


class NotMeanZero(DivgridError):
    pass


class ToleranceNotReached(DivgridError):
    pass


class TooLarge(DivgridError):
    pass


class BadExponent(DivgridError):
    pass


class GridTooNarrow(DivgridError):
    pass
