"""Exception hierarchy.

Every error carries an ``exit_code`` that the CLI maps to its process exit
status: 2 usage/configuration, 3 data or format problems, 4 numeric
divergence.
"""


class LandvecError(Exception):
    exit_code = 3


class UsageError(LandvecError, ValueError):
    exit_code = 2


class ConfigurationError(UsageError):
    pass


class InvalidBoundsError(UsageError):
    pass


class InvalidKError(UsageError):
    pass


class IndexOutOfRangeError(UsageError, IndexError):
    pass


class UnsupportedDimensionError(UsageError):
    pass


class UnknownFunctionError(UsageError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class DataError(LandvecError, ValueError):
    pass


class DimensionError(DataError):
    pass


class NonFiniteInputError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class InsufficientSamplesError(DataError):
    pass


class DegenerateDataError(DataError):
    pass


class NameCollisionError(DataError):
    pass


class CacheMismatchError(DataError):
    pass


class IncompatibilityError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class FormatError(DataError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class CorruptionError(FormatError):
    pass


class GeneratorExhaustedError(LandvecError, RuntimeError):
    pass


class DivergenceError(LandvecError, ArithmeticError):
    exit_code = 4


class ConvergenceError(LandvecError, ArithmeticError):
    exit_code = 4

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} after {iterations} iterations")
        self.iterations = iterations
