"""Exception hierarchy shared across the engine.

The CLI maps these onto exit codes (data 2, numerical 3, config 4); the
service maps them onto HTTP statuses.
"""


class EngineError(Exception):
    """Base class for engine failures."""


class DataError(EngineError, ValueError):
    """Input data is malformed, inconsistent, or insufficient."""


class NumericalError(EngineError, ArithmeticError):
    """A numerical procedure failed with no defined fallback."""


class ConfigError(EngineError, ValueError):
    """A run configuration is invalid."""
