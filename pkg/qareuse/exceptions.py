"""qareuse specific exceptions"""

from typing import Any, List, Optional, Sequence, Set


class QAReuseError(Exception):
    """Base exception for qareuse operations"""
    pass


class ConfigurationError(QAReuseError):
    """Raised when a configuration value is out of range"""
    pass


class InputError(QAReuseError):
    """Raised when an input cannot be processed at all (CLI exit code 1)"""
    pass


class DumpParseError(InputError):
    """Raised when the posts dump is not well-formed XML"""

    def __init__(self, message: str, byte_offset: int = 0,
                 line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset
        self.line = line
        self.column = column


class RepositoryError(InputError):
    """Raised when an application tree or repository cannot be read"""

    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path


class InconsistencyRowError(InputError):
    """Raised for a malformed row of the inconsistency table"""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ManifestError(InputError):
    """Raised when a release or pipeline manifest is invalid"""
    pass


class DownloadError(InputError):
    """Raised when a remote dump cannot be fetched"""

    def __init__(self, message: str, status_code: Optional[int] = None):
        super().__init__(message)
        self.status_code = status_code


class DomainError(QAReuseError, ValueError):
    """Raised when a pure operation receives arguments outside its domain"""
    pass


class PipelineError(QAReuseError):
    """Raised when a pipeline stage cannot complete"""
    pass


class IncompleteShardsError(PipelineError):
    """Raised when work units still fail after the retry limit (CLI exit code 2)"""

    def __init__(self, unit_ids: Sequence[str], errors: Optional[List[str]] = None,
                 partial: Optional[Set[Any]] = None):
        ids = ", ".join(unit_ids)
        super().__init__(f"{len(unit_ids)} work unit(s) incomplete: {ids}")
        self.unit_ids = list(unit_ids)
        self.errors = list(errors or [])
        self.partial = set(partial or ())
