"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the range where a model is valid."""


class FormatError(ValueError):
    """A file does not conform to its documented layout."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class FitError(RuntimeError):
    """A least-squares fit failed; ``last`` holds the final parameter iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field path."""
