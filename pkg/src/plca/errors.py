"""Exception hierarchy. Everything the CLI maps to exit code 2 derives from PlcaError."""


class PlcaError(ValueError):
    pass


class ValidationError(PlcaError):
    pass


class ShapeError(PlcaError):
    pass


class DomainError(PlcaError):
    pass


class ParseError(PlcaError):
    pass


class SchemaError(PlcaError):
    pass


class VersionMismatchError(SchemaError):
    pass


class SearchSpaceTooLargeError(PlcaError):
    def __init__(self, points, limit):
        super().__init__(f"search space has {points} points, limit is {limit}")
        self.points = points
        self.limit = limit
