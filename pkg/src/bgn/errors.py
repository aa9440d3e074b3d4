"""Exception hierarchy shared by all modules."""


class BGNError(Exception):
    pass


class DataError(BGNError):
    """Anything wrong with an input table."""


class MissingFileError(DataError):
    pass


class EmptyFileError(DataError):
    pass


class MissingColumnError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a finite real")


class EmptySplitError(DataError):
    pass


class DimensionError(BGNError):
    pass


class DegenerateDirectionError(BGNError):
    """The hyperplane direction cannot separate the examples (zero weights or constant projection)."""


class EmptySideError(BGNError):
    pass


class SchemaError(BGNError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class UnsupportedVersionError(SchemaError):
    pass


class EnumerationLimitError(BGNError):
    pass
