"""Error types carrying the stable error codes used in reports and CLI output."""

from __future__ import annotations


class PairingError(Exception):
    """Base class; ``code`` is the stable identifier shown to users."""

    code = "ERROR"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class TolNotMet(PairingError):
    code = "TOL_NOT_MET"


class NoCertificate(PairingError):
    code = "NO_CERTIFICATE"


class TRangeError(PairingError):
    code = "T_RANGE"


class InvalidCantorOverlap(PairingError):
    code = "INVALID_CANTOR_OVERLAP"


class LocatorMiss(PairingError):
    code = "LOCATOR_MISS"


class SelectionMismatch(PairingError):
    code = "SELECTION_MISMATCH"


class JumpsTooClose(PairingError):
    code = "JUMPS_TOO_CLOSE"


class ScenarioParseError(PairingError):
    code = "PARSE_ERROR"

    def __init__(self, message: str, line: int | None = None, column: int | None = None, path: str | None = None):
        super().__init__(message, line=line, column=column, path=path)
        self.line = line
        self.column = column
        self.path = path

    def __str__(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}, column {self.column}")
        if self.path:
            where.append(f"at {self.path}")
        suffix = f" ({'; '.join(where)})" if where else ""
        return f"{self.code}: {self.message}{suffix}"


class ScenarioValidationError(PairingError):
    code = "VALIDATION_ERROR"

    def __init__(self, invariant: str, message: str):
        super().__init__(message, invariant=invariant)
        self.invariant = invariant

    def __str__(self) -> str:
        return f"{self.code} [{self.invariant}]: {self.message}"


# SAMPLE_OUTSIDE is reported inside density reports, never raised.
SAMPLE_OUTSIDE = "SAMPLE_OUTSIDE"
