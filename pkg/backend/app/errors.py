"""
Exception hierarchy for the solver laboratory.

Every error carries the exit code the CLI reports for it:
0 success, 1 usage/config error, 2 numerical assumption violation, 3 I/O error.
"""

from typing import Optional


class RichardsonError(Exception):
    exit_code: int = 1


class InvalidArgumentError(RichardsonError):
    exit_code = 1


class ConfigError(RichardsonError):
    exit_code = 1

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class DimensionMismatchError(RichardsonError):
    exit_code = 1


class SingularPreconditionerError(RichardsonError):
    exit_code = 2


class AssumptionViolationError(RichardsonError):
    """A splitting does not satisfy an assumption a solver path depends on."""

    exit_code = 2

    def __init__(self, assumption: str, detail: str = ""):
        self.assumption = assumption
        message = f"assumption violated: {assumption}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class NonFiniteError(RichardsonError):
    exit_code = 2


class CertificationFailedError(RichardsonError):
    exit_code = 2


class ScheduleContractError(RichardsonError):
    exit_code = 2


class MatrixMarketParseError(RichardsonError):
    exit_code = 3

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class OutputError(RichardsonError):
    exit_code = 3
