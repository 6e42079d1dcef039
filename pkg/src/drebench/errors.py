"""Exception hierarchy shared across the harness.

CLI exit codes map onto these: usage errors -> 1, DataError -> 2,
EndpointError -> 3.
"""


class DrebenchError(Exception):
    """Base class for all harness errors."""


class UsageError(DrebenchError):
    """The command line or configuration was malformed."""


class DataError(DrebenchError):
    """Corpus, schema, or run-artifact content is invalid."""


class EndpointError(DrebenchError):
    """A completion endpoint failed hard (auth, retries exhausted, unknown prompt)."""
