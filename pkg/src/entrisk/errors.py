"""Error types shared across the package, mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Malformed or missing input data (CLI exit code 3)."""


class NumericalError(ArithmeticError):
    """Non-finite state encountered during a run (CLI exit code 4)."""
