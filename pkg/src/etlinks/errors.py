"""Exception hierarchy.

Everything deriving from :class:`InputError` is a problem with user data or
configuration (CLI exit status 1); anything else escaping is internal (2).
"""


class InputError(Exception):
    """Bad input data, configuration or arguments."""


class ParseError(InputError):
    """Malformed embedding file."""

    def __init__(self, message, line=None, offset=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.offset = offset


class HeaderError(ParseError):
    pass


class CoordinateCountError(ParseError):
    pass


class DuplicateKeyError(ParseError):
    pass


class NonFiniteError(ParseError):
    pass


class EntryCountError(ParseError):
    pass


class NormalizationError(InputError):
    pass


class RosterError(InputError):
    """Malformed roster / patent / anchor CSV."""


class MissingColumnError(RosterError):
    pass


class BadValueError(RosterError):
    pass


class DuplicateEntryError(RosterError):
    pass


class DimensionError(InputError):
    pass


class RefinementError(InputError):
    pass


class HarvestError(InputError):
    pass
