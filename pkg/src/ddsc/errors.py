"""Exception types raised across the package."""


class DDSCError(ValueError):
    """Base class for every input or numerical error raised by ddsc."""


class ShapeMismatch(DDSCError):
    pass


class DimensionMismatch(ShapeMismatch):
    pass


class LengthMismatch(ShapeMismatch):
    pass


class WindowLengthMismatch(ShapeMismatch):
    pass


class NegativeEntry(DDSCError):
    pass


class NonFiniteInput(DDSCError):
    pass


class AggregateInconsistent(DDSCError):
    pass


class ZeroTruthTotal(DDSCError):
    """SAE is undefined because the true total energy is zero."""


class ZeroTruthEnergy(DDSCError):
    """NDE is undefined because the true signal has zero energy."""


class UnitUndeclared(DDSCError):
    pass


class EmptyInput(DDSCError):
    pass


class InsufficientHouses(DDSCError):
    pass


class NoCompleteWeeks(DDSCError):
    pass


class InvalidSpec(DDSCError):
    pass


class DimensionTooLarge(DDSCError):
    pass
