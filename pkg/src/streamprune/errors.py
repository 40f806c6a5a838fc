from typing import Optional


class StreamPruneError(Exception):
    """Base exception for engine and harness errors."""

    def __init__(self, message: str, exit_code: int = 2, hint: Optional[str] = None):
        super().__init__(message)
        self.exit_code = exit_code
        self.hint = hint


class ConfigError(StreamPruneError):
    """Raised when an experiment config fails validation."""

    def __init__(self, message: str, hint: Optional[str] = None):
        super().__init__(message, 1, hint)


class StreamDataError(StreamPruneError):
    """Raised for unreadable or malformed stream files."""

    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message, 2)
        self.row = row


class SchemaMismatchError(StreamPruneError):
    """Raised when an instance or chunk does not conform to the expected schema."""

    def __init__(self, message: str):
        super().__init__(message, 2, "Check num_features / num_classes of the stream against the model.")


class EmptyEnsembleError(StreamPruneError):
    """Raised when an empty ensemble is asked to vote."""

    def __init__(self):
        super().__init__("Ensemble has no components", 2)


class PruneError(StreamPruneError):
    """Raised when a prune request cannot be honoured."""


class ReportMismatchError(StreamPruneError):
    """Raised when reports that must be aligned are not."""
