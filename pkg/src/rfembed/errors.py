"""Exception types shared across the toolkit.

ValidationError and its subclasses map to CLI exit code 1; OSError maps to 2.
"""


class ValidationError(Exception):
    """Bad inputs, malformed files, or contract violations detected at runtime."""


class ConfigError(ValidationError):
    """Malformed or out-of-range configuration values."""


class CorruptFileError(ValidationError):
    """On-disk data that cannot be interpreted (truncated, non-finite, wrong size)."""


class UnsupportedModulationError(ValidationError):
    """A modulation family or parameter combination the synthesizer does not know."""


class TrainingDivergedError(Exception):
    """Non-finite loss encountered during optimization; carries diagnostic state."""

    def __init__(self, message, epoch=None, step=None):
        super().__init__(message)
        self.epoch = epoch
        self.step = step
