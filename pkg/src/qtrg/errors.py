"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """A parameter is outside its documented domain."""


class InvalidPartitionError(ValueError):
    """Rank extents are empty, overlapping, or do not cover the field."""


class FormatError(ValueError):
    """A snapshot file or series directory could not be parsed."""

    def __init__(self, message: str, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path is not None else message)


class DegenerateRangeError(ArithmeticError):
    """The high and low percentiles coincide, so the indicator is undefined."""


class OrderingError(ValueError):
    """Timesteps were not fed in strictly increasing order."""
