"""Exception types shared across the package."""


class GPHierError(Exception):
    """Base class for all package errors."""


class ConfigError(GPHierError, ValueError):
    """Invalid grid, model or experiment configuration."""


class BudgetError(GPHierError, MemoryError):
    """A dense kernel would exceed the configured entry cap."""


class RankCapError(BudgetError):
    """A separable kernel would exceed its rank cap."""


class ShapeMismatchError(GPHierError, ValueError):
    """Operands live on different grids or particle numbers."""


class NumericalError(GPHierError, ArithmeticError):
    """A computation produced a value that violates its contract."""


class BlowUpError(NumericalError):
    """Field amplitude left the finite range during time stepping."""


class SnapshotFormatError(GPHierError, ValueError):
    """A binary snapshot file is malformed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
