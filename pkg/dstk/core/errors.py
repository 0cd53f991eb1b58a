"""Exception hierarchy for dstk.

Every error carries the process exit code the CLI should return for it:
2 for usage problems, 3 for data and contract problems, 4 when an
external command fails.
"""

from __future__ import annotations

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_EXTERNAL = 4


class DstkError(Exception):
    """Base class for all dstk errors."""

    exit_code = EXIT_DATA


class ConfigError(DstkError, ValueError):
    """A configuration value is out of its documented range."""

    exit_code = EXIT_USAGE


class CorpusError(DstkError):
    """Malformed corpus input."""


class CorpusDecodeError(CorpusError):
    """A corpus file is not valid UTF-8."""

    def __init__(self, path: str, offset: int, reason: str):
        self.path = path
        self.offset = offset
        super().__init__(f"{path}: invalid UTF-8 at byte offset {offset} ({reason})")


class AlignmentError(CorpusError):
    """Two sides that must be aligned line by line are not."""

    def __init__(self, left_count: int, right_count: int, what: str = "bitext"):
        self.left_count = left_count
        self.right_count = right_count
        super().__init__(
            f"{what} is not aligned: {left_count} != {right_count} lines"
        )


class SelectionError(DstkError):
    """Data selection cannot run (e.g. empty seed)."""


class BpeFormatError(DstkError):
    """Malformed BPE model file or segmented text."""


class MetricError(DstkError):
    """A metric is undefined on the given input."""


class TranslatorError(DstkError):
    """Base class for translator failures."""


class ContractViolationError(TranslatorError):
    """A translator returned a different number of lines than it was given."""

    def __init__(self, expected: int, actual: int, source: str):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"{source} returned {actual} lines for {expected} input lines"
        )


class ExternalCommandError(TranslatorError):
    """An external command exited with a nonzero status."""

    exit_code = EXIT_EXTERNAL

    def __init__(self, command: str, returncode: int | None, stderr: str = ""):
        self.command = command
        self.returncode = returncode
        self.stderr = stderr
        detail = stderr.strip().splitlines()[-1] if stderr.strip() else "no output"
        super().__init__(
            f"command failed with status {returncode}: {command} ({detail})"
        )


class TranslatorTimeoutError(ExternalCommandError):
    """An external command did not finish within its timeout."""

    def __init__(self, command: str, timeout: float):
        self.timeout = timeout
        super().__init__(command, None, f"timed out after {timeout:g}s")


class PipelineError(DstkError):
    """A pipeline phase failed; wraps the underlying error."""

    def __init__(self, phase: str, cause: DstkError):
        self.phase = phase
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"{phase} phase failed: {cause}")
