"""Exception hierarchy shared by the pipeline stages."""


class StvqaError(Exception):
    """Base class for all package errors."""


class InputFormatError(StvqaError):
    """The input video or file could not be interpreted."""


class HeaderParseError(InputFormatError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnsupportedFormatError(InputFormatError):
    pass


class TruncatedFrameError(InputFormatError):
    def __init__(self, frame_index, expected, got):
        super().__init__(
            f"frame {frame_index}: payload truncated, expected {expected} bytes, got {got}"
        )
        self.frame_index = frame_index


class GeometryError(StvqaError, ValueError):
    """Input dimensions are too small for the requested operation."""


class ParameterError(StvqaError, ValueError):
    pass


class NumericError(StvqaError):
    """Base for numeric failures (degenerate data, undefined statistics)."""


class DegenerateDistributionError(NumericError):
    pass


class OneSidedDistributionError(DegenerateDistributionError):
    pass


class UndefinedCorrelationError(NumericError):
    pass


class DataError(NumericError, ValueError):
    pass


class ConfigurationError(StvqaError):
    pass


class SchemaError(StvqaError, ValueError):
    """Feature vector or model file does not match the expected schema."""


class AssemblyError(SchemaError):
    pass


class PlanError(StvqaError, ValueError):
    pass
