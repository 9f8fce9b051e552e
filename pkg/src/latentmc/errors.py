"""Exception hierarchy shared across the package."""


class LatentMcError(Exception):
    pass


class DimensionError(LatentMcError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class DomainError(LatentMcError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class NumericError(LatentMcError, ArithmeticError):
    """A NaN or Inf appeared during a computation; the offending op is named."""


class ContractError(LatentMcError, ValueError):
    """A caller violated an API precondition unrelated to shapes."""


class CheckpointError(LatentMcError, IOError):
    """A checkpoint file is missing, corrupted, or of an unknown version."""
