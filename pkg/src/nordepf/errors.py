"""Exception hierarchy shared across the package.

The CLI maps each family onto an exit code, so new errors should subclass one
of the three roots below rather than ``Exception`` directly.
"""


class ConfigError(ValueError):
    """Invalid configuration or call contract (exit code 1)."""


class DataError(ValueError):
    """Malformed, missing or insufficient input data (exit code 2)."""


class NumericalError(ArithmeticError):
    """A numerical routine could not produce a valid result (exit code 3)."""


class AlignmentError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class UnfillableColumnError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class SchemaError(DataError):
    """Column set or order differs from what a fitted model expects."""


class ProtocolError(ConfigError):
    """Train/validation/test windows violate the evaluation protocol."""


class DegenerateError(ConfigError):
    """A lag, window or split that cannot produce any valid output row."""


class SolverError(NumericalError):
    pass


class MissingArtifactError(DataError):
    """An upstream command has not produced the files a command needs."""
