"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
ExternalServiceError -> 3.
"""


class AnalexError(Exception):
    """Base class for all library errors."""


class UsageError(AnalexError):
    """Invalid parameters or flag combinations."""


class DataError(AnalexError):
    """Malformed or inconsistent input data."""


class FormatError(DataError):
    """A file violates its documented format.

    Carries the offending line number when one is known.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class MissingKeyError(DataError):
    """An embedding-store key or prediction id was not found."""


class KeySchemeError(DataError):
    """An embedding key does not follow any known scheme."""


class DimMismatchError(DataError):
    """Vector length disagrees with the store dimension."""


class ZeroNormError(DataError):
    """Cosine similarity was asked of a zero-length vector.

    A zero offset means a statute and its case were embedded to the same
    point; callers must see this rather than a silent NaN.
    """


class ExternalServiceError(AnalexError):
    """A remote completion endpoint failed terminally."""
