"""Exception types raised by the kernel."""


class DirCalcError(ValueError):
    """Base class for all kernel errors."""


class PointNotInSet(DirCalcError):
    pass


class EmptySet(DirCalcError):
    pass


class DimensionError(DirCalcError):
    pass


class DomainError(DirCalcError):
    pass


class UnboundedBelow(DirCalcError):
    pass


class PointNotInImage(DirCalcError):
    pass


class PointNotInGraph(DirCalcError):
    pass


class ResourceLimit(DirCalcError):
    """An input exceeds the configured size limits."""
