"""Error taxonomy mapped to CLI exit codes (1 usage, 2 data, 3 run-time)."""


class LandreError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(LandreError):
    """Bad command-line arguments or option combinations."""


class DataError(LandreError):
    """Malformed corpus or dataset files."""


class TrainingError(LandreError):
    """Training could not proceed (divergence, resource exhaustion)."""


class ServingError(LandreError):
    """The inference server could not start or load the model."""
