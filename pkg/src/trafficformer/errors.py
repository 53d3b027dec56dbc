"""Exception hierarchy shared by every module of the package."""


class TrafficformerError(Exception):
    """Base class for all package errors."""


class DimensionError(TrafficformerError, ValueError):
    """Shapes are incompatible for the requested operation."""


class ContractError(TrafficformerError, ValueError):
    """A documented precondition was violated by the caller."""


class NumericError(TrafficformerError, FloatingPointError):
    """A non-finite value was produced or encountered."""


class ConfigError(TrafficformerError, ValueError):
    """A configuration value is invalid or inconsistent."""


class SpecError(ConfigError):
    """A synthetic dataset specification is invalid."""


class ParseError(TrafficformerError, ValueError):
    """An input file could not be parsed."""


class InsufficientDataError(TrafficformerError, ValueError):
    """Not enough time steps or windows for the requested operation."""


class DivergenceError(TrafficformerError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None, step=None):
        super().__init__(message)
        self.epoch = epoch
        self.step = step


class CheckpointError(TrafficformerError, ValueError):
    """A checkpoint file is corrupt or incompatible."""
