"""Exception types shared across the package."""


class RtsAllocError(Exception):
    """Base class for all errors raised by rtsalloc."""


class MissingColumn(RtsAllocError):
    pass


class NonFiniteValue(RtsAllocError):
    def __init__(self, row: int, message: str | None = None):
        self.row = row
        super().__init__(message or f"non-finite value in row {row}")


class NonMonotoneTimestamps(RtsAllocError):
    def __init__(self, row: int, message: str | None = None):
        self.row = row
        super().__init__(message or f"timestamps not strictly increasing at row {row}")


class InvalidSpec(RtsAllocError):
    pass


class DegenerateSeries(RtsAllocError):
    pass


class SeriesTooShort(RtsAllocError):
    pass


class EmptySplit(RtsAllocError):
    pass


class ShapeMismatch(RtsAllocError):
    pass


class NonFiniteGradient(RtsAllocError):
    pass


class NonFiniteParameters(RtsAllocError):
    pass


class Infeasible(RtsAllocError):
    pass


class EmptyCalibration(RtsAllocError):
    pass


class NonPositiveOptimalCost(RtsAllocError):
    pass


class IncompleteGrid(RtsAllocError):
    pass


class ConfigError(RtsAllocError):
    """Invalid experiment or training configuration; message names the key."""
