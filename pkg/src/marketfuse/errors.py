"""Exception hierarchy shared across the engine.

Each top-level class carries a distinct CLI exit code so shell callers can
tell schema problems from data problems from numeric failures without
parsing messages. Pure in-memory misuse (wrong shapes, empty batches)
raises plain ValueError instead.
"""


class EngineError(Exception):
    exit_code = 1


class SchemaError(EngineError):
    """Malformed headers, unknown config keys, values outside declared ranges."""

    exit_code = 2


class DataError(EngineError):
    """Well-formed input that cannot be used: bad rows, ordering, coverage."""

    exit_code = 3


class InsufficientDataError(DataError):
    """Too few rows for the requested operation."""


class EmptyDatasetError(DataError):
    """A join or filter produced no usable samples."""


class NumericError(EngineError):
    """Non-finite values where finite math was required (e.g. divergence)."""

    exit_code = 4


class CompatibilityError(EngineError):
    """Artifacts produced under a different configuration than requested."""

    exit_code = 5
