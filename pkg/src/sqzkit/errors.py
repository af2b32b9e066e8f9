"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, FitConvergenceError -> 4.
"""


class SqzError(Exception):
    """Base class for toolkit errors."""


class ConfigError(SqzError):
    """Invalid configuration document, CLI arguments, or parameters."""


class DataError(SqzError):
    """Malformed or inconsistent input data (trace files, CSV tables)."""


class FitConvergenceError(SqzError):
    """A nonlinear fit failed to converge within its iteration budget."""

    def __init__(self, message: str, final_sse: float | None = None):
        super().__init__(message)
        self.final_sse = final_sse


class SingularNormalEquationsError(SqzError):
    """Normal equations of a least-squares step are numerically singular."""

    def __init__(self, message: str, condition_estimate: float):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate


class UnphysicalInputError(ValueError, SqzError):
    """Input that no lossy Gaussian channel can produce (e.g. a measured
    variance below the loss floor when inverting a detection chain)."""
