class ExporterError(Exception):
    """Base for everything this package raises on purpose."""


class UsageError(ExporterError):
    """Bad job configuration or command-line invocation."""


class DataError(ExporterError):
    """Unreadable or invalid input file."""


class EncoderError(ExporterError):
    """Encoder failed to load or produced inconsistent output."""
