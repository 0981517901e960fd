"""Exception hierarchy shared by the library and the command line.

Each class carries the process exit code the CLI maps it to.
"""


class GraphREError(Exception):
    exit_code = 3


class UsageError(GraphREError, ValueError):
    exit_code = 1


class ConfigError(UsageError):
    pass


class DimensionError(ConfigError):
    """Operand shapes do not conform."""


class DataIntegrityError(GraphREError, ValueError):
    exit_code = 2


class FormatError(DataIntegrityError):
    pass


class EncodingError(DataIntegrityError):
    pass


class LookupFailure(DataIntegrityError, KeyError):
    pass


class NumericError(GraphREError, ArithmeticError):
    exit_code = 3


class DecodeError(NumericError):
    pass


class DegenerateError(NumericError):
    """A statistic is undefined for the given input (e.g. constant series)."""
