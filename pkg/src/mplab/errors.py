"""Exception types shared across the package."""


class MplabError(Exception):
    """Base class for all errors raised by mplab."""


class DomainError(MplabError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateInputError(MplabError, ArithmeticError):
    """A measure-zero degeneracy (zero pivot, singular Gram matrix) was hit."""


class ConvergenceError(MplabError, RuntimeError):
    """An iterative kernel did not converge within its sweep limit."""

    def __init__(self, message, sweeps=None, off_norm=None):
        super().__init__(message)
        self.sweeps = sweeps
        self.off_norm = off_norm


class GuardError(MplabError, ValueError):
    """A numerical validity guard refused to produce an unreliable result."""


class ConfigError(MplabError, ValueError):
    """An experiment configuration is invalid or incomplete."""


class RunError(MplabError, RuntimeError):
    """A Monte Carlo run stopped early; ``completed`` trials finished first."""

    def __init__(self, message, completed=0, total=0):
        super().__init__(message)
        self.completed = completed
        self.total = total


class ReportIOError(MplabError, OSError):
    """Writing a report failed."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
