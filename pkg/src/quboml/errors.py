"""Exception types raised across the package."""


class QuboMLError(ValueError):
    """Base class for all data/contract errors (CLI maps these to exit code 2)."""


class DimensionError(QuboMLError):
    pass


class InvalidConstraintError(QuboMLError):
    pass


class EmptyProblemError(QuboMLError):
    pass


class SizeGuardError(QuboMLError):
    pass


class DegenerateLabelsError(QuboMLError):
    pass


class DegenerateModelError(QuboMLError):
    pass


class DegenerateVectorError(QuboMLError):
    pass


class InvalidDistanceError(QuboMLError):
    pass


class UndefinedSeparationError(QuboMLError):
    pass


class ParseError(QuboMLError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EmptyDatasetError(QuboMLError):
    pass
