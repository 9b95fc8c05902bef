"""Exception types raised across the package."""


class JCBerryError(Exception):
    """Base class for all package errors."""


class TruncationError(JCBerryError):
    """Fock truncation too small for the requested coherent amplitude."""


class UnknownLabel(JCBerryError, KeyError):
    pass


class DimensionMismatch(JCBerryError, ValueError):
    pass


class NonFinite(JCBerryError, ValueError):
    pass


class NonPhysicalState(JCBerryError):
    """A density matrix left the Hermitian / unit-trace / positive cone."""


class RatioMismatch(JCBerryError, ValueError):
    """Per-qubit Omega_j / lambda_j ratios differ while a common dark state is required."""


class OpenPath(JCBerryError, ValueError):
    pass


class OrthogonalStates(JCBerryError, ValueError):
    pass


class StepTooLarge(JCBerryError, ValueError):
    """Consecutive overlaps differ in phase by too much to unwrap unambiguously."""


class NormalizationError(JCBerryError, ValueError):
    pass


class BudgetExceeded(JCBerryError):
    """Dense simulation would exceed the supported Hilbert-space size."""


class ParseError(JCBerryError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownKey(ParseError):
    pass


class MissingKey(ParseError):
    pass
