"""Exception types raised across the package."""


class AdsError(Exception):
    """Base class for all package errors."""


class ValidationError(AdsError, ValueError):
    """Input violates a documented precondition."""


class DimensionError(ValidationError):
    """Array shapes do not agree."""


class DegenerateInputError(ValidationError):
    """Input carries no usable information (e.g. all weights zero)."""


class SchemaError(ValidationError):
    """A required column is missing from a tabular input."""

    def __init__(self, column, path=None):
        self.column = column
        self.path = path
        where = f" in {path}" if path is not None else ""
        super().__init__(f"missing required column {column!r}{where}")


class ParseError(ValidationError):
    """A cell in a tabular input could not be parsed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column!r}")
        prefix = f"{', '.join(loc)}: " if loc else ""
        super().__init__(prefix + message)
