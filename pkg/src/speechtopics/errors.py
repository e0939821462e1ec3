"""Exception hierarchy shared across the package.

The CLI maps exception classes onto exit codes: input/usage problems exit
with 2, numeric/model failures with 3.
"""


class SpeechTopicsError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InputError(SpeechTopicsError):
    """Bad input: unreadable files, malformed records, invalid parameters."""

    exit_code = 2


class ValidationError(InputError):
    """A record or value violates a documented invariant."""


class FormatError(InputError):
    """A file does not conform to its documented format."""


class ParameterError(InputError):
    """An argument is outside its documented range."""


class TermNotFoundError(InputError):
    """A requested term is missing from an embedding space."""


class EmptyWindowError(InputError):
    """A time window retains no usable documents."""


class TrainingError(InputError):
    """Embedding training cannot proceed (e.g. empty effective vocabulary)."""


class ModelError(SpeechTopicsError):
    """Numeric or model-state failure."""

    exit_code = 3


class NumericError(ModelError):
    """Non-finite values or a failed matrix computation."""


class CoherenceUndefinedError(ModelError):
    """Too few usable terms to score a topic."""
