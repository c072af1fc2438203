"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to.
"""


class FractalVAError(Exception):
    exit_code = 1


class SpecError(FractalVAError):
    """Invalid fractal description (bad identification table, weights, ...)."""

    exit_code = 2


class GraphMismatchError(FractalVAError):
    exit_code = 2


class PreconditionError(FractalVAError):
    exit_code = 2


class ConfigError(FractalVAError):
    exit_code = 2


class SolverError(FractalVAError):
    """Linear/eigen solver failure; ``residual`` holds the last residual if known."""

    exit_code = 1

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class VerificationError(FractalVAError):
    exit_code = 3
