class RaresynthError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(RaresynthError):
    """Bad input or configuration (CLI exit code 1)."""


class MissingColumn(ValidationError):
    def __init__(self, name):
        super().__init__(f"missing column: {name!r}")
        self.name = name


class ParseFailure(ValidationError):
    def __init__(self, row, column, value=None):
        super().__init__(f"cannot parse row {row}, column {column!r}: {value!r}")
        self.row = row
        self.column = column


class EmptyFile(ValidationError):
    pass


class MissingImputationSource(RaresynthError):
    pass


class NegativeAirTime(RaresynthError):
    pass


class UnknownAirport(RaresynthError):
    pass


class SingleClassInput(ValidationError):
    pass


class UnknownCategory(ValidationError):
    pass


class SpanMismatch(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class NonFiniteLoss(RaresynthError):
    def __init__(self, epoch, detail=""):
        super().__init__(f"non-finite loss at epoch {epoch} {detail}".strip())
        self.epoch = epoch


class ModeCollapseWarning(UserWarning):
    pass


class VersionMismatch(RaresynthError):
    pass


class CorruptFile(RaresynthError):
    pass


class KTooLarge(ValidationError):
    pass


class NoPositives(ValidationError):
    pass


class EmptyTable(ValidationError):
    pass


class DegenerateVariance(RaresynthError):
    pass


class EmptyColumn(ValidationError):
    pass


class AugmentationTooLarge(ValidationError):
    pass


class OutOfRangeInput(ValidationError):
    pass


class EmptySpace(ValidationError):
    pass


class UnknownKind(ValidationError):
    pass
