"""Custom exception classes.

Each error carries the process exit code the CLI reports for it:
1 usage / configuration, 2 data, 3 numeric failure.
"""

from typing import Any, Dict, Optional

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class SelfHDRError(Exception):
    """Base exception for the HDR reconstruction pipeline."""

    def __init__(
        self,
        message: str,
        exit_code: int = EXIT_DATA,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class ValidationError(SelfHDRError):
    """Rejected input: non-finite pixels, values outside the admissible range."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=EXIT_DATA, details=details)


class ShapeMismatchError(ValidationError):
    """Arrays that must share a shape do not."""


class NotFoundError(SelfHDRError):
    """A file, scene or directory does not exist."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=EXIT_DATA, details=details)


class DataFormatError(SelfHDRError):
    """A file exists but cannot be decoded (bad magic, truncated payload...)."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=EXIT_DATA, details=details)


class CheckpointError(SelfHDRError):
    """A checkpoint is corrupt or does not match the expected model spec."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=EXIT_DATA, details=details)


class MissingArtifactError(SelfHDRError):
    """Supervision artifacts required by a training phase were not built."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=EXIT_DATA, details=details)


class ModelError(SelfHDRError):
    """Unknown architecture or perceptual backbone."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=EXIT_DATA, details=details)


class ConfigError(SelfHDRError):
    """Invalid configuration document or command-line combination."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=EXIT_USAGE, details=details)


class NumericError(SelfHDRError):
    """Training or inference produced non-finite numbers."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=EXIT_NUMERIC, details=details)
