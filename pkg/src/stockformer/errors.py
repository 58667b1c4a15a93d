"""Exception hierarchy shared across the pipeline.

Three branches map onto the CLI exit codes: bad arguments (1), bad data (2),
numeric failures (3).
"""


class StockformerError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(StockformerError):
    """A call was made with arguments outside its contract."""


class DataError(StockformerError):
    """Input data violated a contract (CLI exit code 2)."""


class MalformedRowError(DataError):
    def __init__(self, row_index: int, reason: str):
        super().__init__(f"row {row_index}: {reason}")
        self.row_index = row_index
        self.reason = reason


class MissingColumnError(DataError):
    pass


class EmptyFileError(DataError):
    pass


class InvariantViolationError(DataError):
    def __init__(self, reason: str, row_index: int | None = None):
        msg = reason if row_index is None else f"row {row_index}: {reason}"
        super().__init__(msg)
        self.row_index = row_index
        self.reason = reason


class InsufficientHistoryError(DataError):
    pass


class DegenerateFeatureError(DataError):
    pass


class UnknownKeyError(DataError):
    pass


class SimplexViolationError(DataError):
    pass


class LengthMismatchError(DataError):
    pass


class DegenerateTruthError(DataError):
    pass


class NoValidPairsError(DataError):
    pass


class IoError(DataError):
    pass


class NumericError(StockformerError):
    """Numeric contract failure (CLI exit code 3)."""


class ShapeMismatchError(NumericError):
    pass


class NotScalarError(NumericError):
    pass


class MissingGradError(NumericError):
    pass
