import jsonschema


class SpeedLimitError(Exception):
    """Base class for all errors raised by tslim."""

    exit_code: int = 1


class ValidationError(SpeedLimitError, ValueError):
    """A value violates the invariants of a domain type or an operation."""

    exit_code = 2


class ConfigError(ValidationError):
    """Invalid experiment configuration or integrator settings."""


class NumericalError(SpeedLimitError, ArithmeticError):
    """A quantity is undefined or could not be computed reliably."""

    exit_code = 3


class ArchiveError(SpeedLimitError):
    """A trajectory archive is malformed or incomplete."""

    exit_code = 4


def schema_message(error: jsonschema.ValidationError) -> str:
    """Dotted instance path and message of a schema violation."""
    location = ".".join(str(part) for part in error.path)
    return f"{location}: {error.message}" if location else error.message
