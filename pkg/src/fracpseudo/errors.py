"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class FracPseudoError(Exception):
    """Base class for all package errors."""


class InvalidParams(FracPseudoError, ValueError):
    """Parameters outside the supported domain."""


class InvalidAlpha(InvalidParams):
    """Fractional order outside the range an operation accepts."""


class NumericalFailure(FracPseudoError):
    """A computation could not reach its accuracy contract.

    ``mode_index`` is set when the failure belongs to one spectral mode so
    callers (the CLI in particular) can report which mode broke.
    """

    def __init__(self, message: str, mode_index: int | None = None):
        super().__init__(message)
        self.mode_index = mode_index

    def with_mode(self, mode_index: int) -> "NumericalFailure":
        if self.mode_index is None:
            self.mode_index = mode_index
            self.args = (f"mode {mode_index}: {self.args[0]}",) + self.args[1:]
        return self


class NonConvergence(NumericalFailure):
    pass


class QuadratureFailure(NumericalFailure):
    pass


class DenominatorUnderflow(NumericalFailure):
    pass


class NumericOverflow(NumericalFailure):
    pass


class UnknownSpectrum(InvalidParams):
    pass


class InvalidTruncation(InvalidParams):
    pass


class RegimeMismatch(InvalidParams):
    pass


class MissingDerivative(InvalidParams):
    pass


class InsufficientRefinements(InvalidParams):
    pass


class ConfigError(FracPseudoError):
    """Invalid experiment configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
