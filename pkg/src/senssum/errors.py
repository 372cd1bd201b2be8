"""Exception types shared across the toolkit.

Every error raised on purpose derives from SenssumError so callers can
catch toolkit failures without swallowing programming mistakes.
"""

from __future__ import annotations


class SenssumError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(SenssumError):
    """Caller passed a value that violates a documented precondition."""


class ConfigError(SenssumError):
    """A configuration value is out of range or inconsistent."""


class DataError(SenssumError):
    """Data passed validation shape-wise but is semantically unusable."""


class ManifestError(SenssumError):
    """A corpus manifest file is malformed.

    `line` is the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BackendError(SenssumError):
    """A transduction backend failed permanently.

    `failed_ids` lists the request ids that never received a usable
    response, so callers can report exactly which items were lost.
    """

    def __init__(self, message: str, failed_ids: list[str] | None = None):
        if failed_ids:
            message = f"{message} (failed ids: {', '.join(failed_ids)})"
        super().__init__(message)
        self.failed_ids = list(failed_ids or [])


class UsageError(SenssumError):
    """Command line was called with bad arguments."""
