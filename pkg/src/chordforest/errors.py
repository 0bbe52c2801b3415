"""Exception hierarchy shared across the package.

The split into config / data / model families mirrors the CLI exit codes
(2 / 3 / 4); anything else is an internal bug and surfaces as a plain
exception.
"""


class ChordforestError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ChordforestError):
    """Bad configuration: unreadable config files, invalid options."""


class SchemaError(ConfigError):
    """Construct schema file is malformed or violates its invariants."""


class DataError(ChordforestError):
    """Input data is malformed or violates a documented precondition."""


class ModelError(ChordforestError):
    """Model fitting or evaluation cannot proceed."""


class StageError(ChordforestError):
    """Pipeline stage failure; wraps the underlying error with its stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
