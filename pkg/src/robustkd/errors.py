"""Exception types shared across the package.

Every error class maps to one failure family so callers (and the CLI exit-code
table) can dispatch on type instead of parsing messages.
"""


class RobustKDError(Exception):
    """Base class for all package errors."""


class ShapeError(RobustKDError, ValueError):
    """Tensor/array shapes incompatible with the requested operation."""


class DomainError(RobustKDError, ValueError):
    """Math operation applied outside its valid domain (log of <= 0, x/0)."""


class NumericError(RobustKDError, ArithmeticError):
    """A forward or backward pass produced NaN. Never silent."""


class GraphError(RobustKDError, RuntimeError):
    """Autograd graph misuse, e.g. backward through an already-consumed graph."""


class ConfigError(RobustKDError, ValueError):
    """Invalid or inconsistent configuration value."""


class FormatError(RobustKDError, ValueError):
    """Malformed external file (WAV container, checkpoint container, ...)."""


class DataError(RobustKDError, ValueError):
    """Dataset/manifest content does not match expectations."""


class MetricError(RobustKDError, ValueError):
    """A metric was asked to evaluate degenerate input."""


class DegenerateAnchorError(MetricError):
    """Score aggregation with base == SOTA for some metric."""


class StateError(RobustKDError, RuntimeError):
    """Object used in a state it must not be in (e.g. unfrozen teacher)."""


class TrainingError(RobustKDError, RuntimeError):
    """Training aborted (NaN loss/gradients). Carries last good checkpoint."""

    def __init__(self, message, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path
