"""Exception hierarchy shared by the solver, the reference path and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class NeurosplitError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DimensionError(NeurosplitError, ValueError):
    """Signals or operators defined on incompatible grids."""

    exit_code = 2


class ConfigurationError(NeurosplitError, ValueError):
    """Invalid configuration, parameters or schema violations."""

    exit_code = 2

    def __init__(self, message, pointer=None):
        super().__init__(message if pointer is None else f"{pointer}: {message}")
        self.pointer = pointer


class DivergenceError(NeurosplitError, RuntimeError):
    """The outer iteration blew up."""

    exit_code = 3


class InnerResolventError(NeurosplitError, RuntimeError):
    """A branch resolvent fixed-point iteration ran out of iterations."""

    exit_code = 4

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class StiffnessError(NeurosplitError, RuntimeError):
    """The reference integrator failed (step size underflow or similar)."""

    exit_code = 4


class VerificationError(NeurosplitError, RuntimeError):
    """A verification run fell outside its thresholds."""

    exit_code = 5
