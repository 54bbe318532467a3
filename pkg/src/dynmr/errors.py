"""Package-wide error types."""


class NumericalError(RuntimeError):
    """Non-finite values where a finite result is required."""


class FormatError(RuntimeError):
    """Malformed container file (bad magic, version, or payload length)."""
