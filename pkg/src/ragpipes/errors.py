"""Exception hierarchy shared by all ragpipes modules.

The CLI maps these onto exit codes: validation and configuration problems
exit 1, I/O and remote failures exit 2.
"""

from __future__ import annotations


class RagError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RagError):
    """Invalid input value or violated invariant (bad shape, empty text, ...)."""


class LoadError(RagError):
    """A dataset or corpus file could not be parsed into canonical records."""


class FormatError(RagError):
    """A persisted binary artifact is corrupt, truncated, or wrong version."""


class ConfigError(RagError):
    """Missing or inconsistent configuration (unknown keys, absent script entry)."""


class ProtocolError(RagError):
    """A remote service answered with a malformed or inconsistent payload."""


class TransportError(RagError):
    """A remote request failed after retries. Carries the attempt count."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(f"{message} (after {attempts} attempt{'s' if attempts != 1 else ''})")
        self.attempts = attempts


class PipelineStageError(RagError):
    """A pipeline stage failed; ``stage`` names which one."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
