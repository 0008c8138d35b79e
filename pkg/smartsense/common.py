"""Common utilities: logging setup and the exception hierarchy."""

import logging
from pathlib import Path
from typing import NoReturn as Never

logger = logging.getLogger(__name__)


def configure_logging(debug: bool) -> None:
    """Configure logging level based on debug flag.

    Args:
        debug: If True, set DEBUG level; otherwise INFO level.
    """
    level = logging.DEBUG if debug else logging.INFO
    # force=True allows reconfiguring after import-time basicConfig calls
    logging.basicConfig(level=level, format="%(message)s", force=True)


class SmartSenseError(Exception):
    """Base exception for all SmartSense failures.

    The CLI maps each subclass family onto an exit code, so library code
    raises and never exits.
    """

    exit_code = 1


class UsageError(SmartSenseError):
    """Invalid invocation: bad flags, wrong history length, k out of range."""

    exit_code = 1


class ConfigError(UsageError, ValueError):
    """Invalid model configuration, training settings or config file."""


class DataError(SmartSenseError):
    """Input data is unreadable or inconsistent with the vocabulary."""

    exit_code = 2


class ParseError(DataError):
    """A CSV or JSON input row could not be parsed.

    Attributes:
        path: File being parsed.
        line: 1-based line number of the offending row.
    """

    def __init__(self, path: str | Path, line: int, reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}: line {line}: {reason}")


class SynthSpecError(DataError):
    """A synthetic generator spec violates one or more constraints."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        listing = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"Invalid synthetic spec:\n{listing}")


class NegativeSamplingError(DataError):
    """Not enough devices outside a routine to draw the negative samples."""


class NumericError(SmartSenseError):
    """Numerical failure during training or evaluation."""

    exit_code = 3


class NonFiniteLossError(NumericError):
    """The objective evaluated to NaN or infinity.

    Attributes:
        step: Global optimization step index, or None outside training.
    """

    def __init__(self, value: float, step: int | None = None):
        self.value = value
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"Non-finite loss {value!r}{where}")


def raise_for_parse_error(path: str | Path, line: int, reason: str) -> Never:
    """Log and raise a ParseError naming the file and line.

    Raises:
        ParseError: Always.
    """
    error = ParseError(path, line, reason)
    logger.error("%s", error)
    raise error
