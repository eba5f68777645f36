"""
Errors - Exception categories shared by every module.

Each module declares its own concrete exceptions next to the code that raises
them; they all derive from one of the categories below so the CLI can map a
failure to its exit code.
"""


class SasvError(Exception):
    """Base class for all toolkit errors."""
    exit_code = 1


class ConfigError(SasvError):
    """Invalid configuration or command-line arguments."""
    exit_code = 2


class DataError(SasvError):
    """Missing, malformed or inconsistent input data."""
    exit_code = 3


class NumericError(SasvError):
    """A numeric procedure failed (divergence, non-finite values)."""
    exit_code = 4


class MissingArtifactError(DataError):
    """An upstream artifact is missing; names the subcommand that produces it."""

    def __init__(self, path, producer: str):
        self.path = path
        self.producer = producer
        super().__init__(f"Missing artifact {path} (produce it with `pmf-sasv {producer}`)")
