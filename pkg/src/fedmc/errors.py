"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array shapes or architectures are incompatible."""


class FormatError(ValueError):
    """A binary file (IDX data or checkpoint) is malformed."""


class ConsistencyError(ValueError):
    """Two inputs that must agree (e.g. image/label counts) do not."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite value."""


class UnsupportedModeError(ValueError):
    """The operation is only defined for a different network configuration."""


class PartitionInfeasibleError(RuntimeError):
    """No valid client partition was found within the redraw budget."""


class ConfigError(ValueError):
    """An experiment configuration failed schema validation."""
