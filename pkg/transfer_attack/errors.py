"""
Exception hierarchy for the toolkit.

Every error carries the exit code the CLI terminates with:
2 configuration, 3 data/format, 4 numerical failure.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigurationError(ToolkitError, ValueError):
    exit_code = 2


class DimensionError(ConfigurationError):
    """Tensor or model shapes do not agree."""


class LabelError(ToolkitError, IndexError):
    exit_code = 2


class DataFormatError(ToolkitError):
    exit_code = 3


class FormatError(DataFormatError):
    """Bad magic bytes or checksum."""


class VersionError(DataFormatError):
    pass


class TruncationError(DataFormatError):
    """File length disagrees with what its header implies."""

    def __init__(self, what: str, expected: int, actual: int):
        super().__init__(f"{what}: expected {expected} bytes, got {actual}")
        self.expected = expected
        self.actual = actual


class ConsistencyError(DataFormatError):
    pass


class ShapeError(DataFormatError):
    pass


class DriftError(DataFormatError):
    """Stored config fingerprint differs from the expected one."""


class NoEligibleSamplesError(DataFormatError):
    pass


class NumericalError(ToolkitError, ArithmeticError):
    exit_code = 4
