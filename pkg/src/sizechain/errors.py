from dataclasses import dataclass
from enum import IntEnum
from typing import Optional


class ExitCode(IntEnum):
    OK = 0
    USAGE = 2  # argparse's own code
    INPUT = 3
    VALIDATION = 4
    NUMERIC = 5
    CHECK_FAILED = 6


@dataclass
class Diagnostic:
    """
    Structured, non-fatal finding produced while running the pipeline.

    Fields:
      - kind: short machine-friendly kind (e.g. 'UndefinedColumn')
      - message: human-friendly message
      - location: optional textual location (e.g. '1998->1999 column 12')
    """
    kind: str
    message: str
    location: Optional[str] = None

    def __str__(self) -> str:
        loc = f" [{self.location}]" if self.location else ""
        return f"{self.kind}: {self.message}{loc}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": self.message, "location": self.location}


class SizeChainError(Exception):
    """Base for fatal errors; `category` and `exit_code` drive the CLI taxonomy."""
    category = "error"
    exit_code = ExitCode.NUMERIC


class InputError(SizeChainError):
    """Missing/unreadable input, missing columns, corrupt or drifted fixture files."""
    category = "input"
    exit_code = ExitCode.INPUT


class ValidationError(SizeChainError, ValueError):
    """Data that violates a domain invariant."""
    category = "validation"
    exit_code = ExitCode.VALIDATION


class NumericError(SizeChainError, ArithmeticError):
    """Numeric precondition failed (e.g. an undefined column is needed)."""
    category = "numeric"
    exit_code = ExitCode.NUMERIC
