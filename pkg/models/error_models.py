from typing import Optional


class ShapeComplexityError(ValueError):
    """Base class for every error the toolkit raises on bad input or bad state"""


class DimensionError(ShapeComplexityError):
    pass


class ContractError(ShapeComplexityError):
    pass


class DecodeError(ShapeComplexityError):
    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class EmptyShapeError(ShapeComplexityError):
    pass


class ParameterError(ShapeComplexityError):
    pass


class CheckpointError(ShapeComplexityError):
    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UndefinedScoreError(ShapeComplexityError):
    pass


class DataError(ShapeComplexityError):
    pass
