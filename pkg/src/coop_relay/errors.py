"""Exception types shared across the package."""


class CoopRelayError(Exception):
    """Base class for all package errors."""


class ParameterError(CoopRelayError, ValueError):
    """A parameter violates its domain constraint (bad intensity, p outside
    (0,1), alpha <= 2, position outside the window, ...)."""


class ConfigError(CoopRelayError, ValueError):
    """A configuration file or flag set is invalid. Carries the offending
    key so the CLI can print an actionable message."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class AccuracyError(CoopRelayError, RuntimeError):
    """A numerical procedure did not reach its accuracy target. The message
    carries convergence diagnostics."""


class FlatObjectiveError(CoopRelayError, RuntimeError):
    """Every point of an optimization grid evaluated to zero objective."""
