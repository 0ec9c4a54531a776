"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ProtosetError(Exception):
    exit_code = 1


class ConfigError(ProtosetError, ValueError):
    """Invalid parameters or experiment configuration."""

    exit_code = 2


class DataError(ProtosetError, ValueError):
    """Malformed or incompatible input data."""

    exit_code = 3


class ShapeError(DataError):
    """Patterns or prototypes with incompatible k, d or total weight."""


class NumericalError(ProtosetError, ArithmeticError):
    """Non-finite intermediate values or a solver that failed to make progress."""

    exit_code = 4
