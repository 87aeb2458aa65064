"""Exception types shared across the package."""


class DeepQRError(Exception):
    """Base class for all package errors."""


class ShapeError(DeepQRError, ValueError):
    """Array dimensions do not line up."""


class DivergenceError(DeepQRError, ArithmeticError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(DeepQRError, ValueError):
    """Invalid scenario / planner / CLI configuration."""


class ConvergenceError(DeepQRError, RuntimeError):
    """An iterative numerical routine hit its iteration cap."""
