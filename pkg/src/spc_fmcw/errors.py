"""Exception types raised across the package."""


class SpcError(Exception):
    """Base class for all package errors."""


class InvalidProfileError(SpcError, ValueError):
    pass


class InvalidSizeError(SpcError, ValueError):
    pass


class DelayTooLargeError(SpcError, ValueError):
    pass


class InvalidSegmentError(SpcError, ValueError):
    pass


class InsufficientNoiseError(SpcError, ValueError):
    pass


class InvalidWindowError(SpcError, ValueError):
    """Search window is empty after clipping to the valid band."""


class NoPeakError(SpcError, ValueError):
    pass


class InvalidEstimateError(SpcError, ValueError):
    pass


class IncompatibleSpectraError(SpcError, ValueError):
    pass


class InvalidAnnulusError(SpcError, ValueError):
    pass


class InvalidFrequencyError(SpcError, ValueError):
    pass


class ConfigError(SpcError, ValueError):
    """Configuration failed to parse or validate.

    ``field`` names the offending key path (dotted) when known, ``line``
    the source line for syntax errors.
    """

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line

    def __str__(self):
        msg = super().__str__()
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.field is not None:
            where.append(f"field '{self.field}'")
        return f"{msg} ({', '.join(where)})" if where else msg


class UnreadableFileError(SpcError, OSError):
    """An input file is missing or cannot be read."""


class CaptureSizeError(SpcError, ValueError):
    """Capture size disagrees with its header."""

    def __init__(self, expected: int, actual: int, path=None):
        where = f"{path}: " if path is not None else ""
        super().__init__(f"{where}expected {expected} bytes, found {actual}")
        self.expected = expected
        self.actual = actual


class InvalidFilterError(SpcError, ValueError):
    """Low-pass specification cannot be realized at the given rate."""
