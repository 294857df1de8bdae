"""Exception hierarchy shared by every module.

The CLI maps these onto its documented exit codes, so new error kinds
should subclass one of the four families below.
"""


class CactusError(Exception):
    """Base class for all errors raised by this package."""


class InputError(CactusError, ValueError):
    """Malformed or inconsistent input (exit code 3 in the CLI)."""


class InvalidVertexError(InputError):
    pass


class DisconnectedGraphError(InputError):
    pass


class ParseError(InputError):
    pass


class InvalidCorrespondenceError(InputError):
    pass


class InstanceTooLargeError(InputError):
    pass


class InvalidMapError(InputError):
    pass


class InvalidMobileError(InputError):
    pass


class ConvergenceError(CactusError, ArithmeticError):
    """A numerical solver did not converge (exit code 4).

    ``bracket`` carries the last bracketing interval when one is known.
    """

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class SamplingBudgetExceeded(CactusError, RuntimeError):
    """A rejection or size-capped sampler ran out of budget (exit code 5)."""


class SizeCapExceeded(SamplingBudgetExceeded):
    """A single Galton-Watson draw grew past ``max_vertices``; retryable."""


class LatticeError(InputError):
    """The requested size is not attainable for the given offspring laws."""
