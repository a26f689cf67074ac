"""Exceptions for the anyhop package."""

from typing import Optional


class CorpusFormatError(ValueError):
    """Raised when a line of a corpus or dataset file cannot be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DuplicateDocumentError(ValueError):
    """Raised when two corpus records share the same document id."""

    pass


class EmptyCorpusError(ValueError):
    """Raised when an index is requested over a corpus with no documents."""

    pass


class UnknownDocumentError(KeyError):
    """Raised when a document id is not present in the corpus or index."""

    pass


class MentionTruncatedError(Exception):
    """Raised when an entity mention falls outside the encoded region."""

    pass


class EmptyDocumentSetError(ValueError):
    """Raised when the reader or the question updater receives no documents."""

    pass


class TrainingDivergedError(RuntimeError):
    """Raised when a training loss becomes non-finite."""

    pass


class ModelMismatchError(Exception):
    """Raised when a parameter file does not match the configured models."""

    pass


class InfeasibleSpecError(ValueError):
    """Raised when a synthetic benchmark spec cannot be realized."""

    pass


class ConfigurationError(ValueError):
    """Raised when a run configuration contains unknown or invalid keys."""

    pass
