"""Exception hierarchy shared across the package."""


class TsDegenError(Exception):
    """Base class for all package errors."""


class ContractError(TsDegenError, ValueError):
    """A precondition of an operation was violated."""


class ShapeError(ContractError):
    """Operand extents are incompatible."""


class NumericError(TsDegenError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class TrainingError(NumericError):
    """Training diverged (NaN/inf loss)."""


class UnsupportedError(TsDegenError, NotImplementedError):
    """The operation is not defined for this model architecture."""


class CheckpointError(TsDegenError, IOError):
    """A checkpoint or capture file is corrupt, truncated or of the wrong version."""


class CompatibilityError(CheckpointError):
    """A checkpoint does not match the model configuration it is loaded into."""


class ConfigError(TsDegenError, ValueError):
    """An experiment configuration is invalid."""
