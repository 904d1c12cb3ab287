"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or schema-violating input data."""


class ParseError(DataError):
    """Unparseable raw input; carries a byte/char offset when known."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class SchemaError(DataError):
    """Structurally valid input that violates the expected schema."""


class FieldError(DataError):
    """A single field failed validation; names the record and field."""

    def __init__(self, message, record_index=None, field=None):
        super().__init__(message)
        self.record_index = record_index
        self.field = field


class RowError(DataError):
    """A CSV row failed validation; carries the 1-based line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class FitError(RuntimeError):
    """A model fit could not be completed (singular regression etc.)."""


class NumericError(RuntimeError):
    """Non-finite values encountered during fitting or scoring."""
