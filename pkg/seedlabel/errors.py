"""
Exception hierarchy for seedlabel.

Every error carries the process exit code the CLI reports for it.
"""


class SeedLabelError(Exception):
    """Base class for all seedlabel errors."""

    exit_code = 1


class ConfigError(SeedLabelError):
    """Invalid flags, hyperparameters or configuration."""

    exit_code = 2


class CheckpointMismatchError(ConfigError):
    """A checkpoint does not belong to the corpus or seed set it is used with."""


class DataError(SeedLabelError):
    """Malformed or unusable input data."""

    exit_code = 3


class ConsistencyError(SeedLabelError):
    """Internal sampler fault: the state broke one of its invariants."""

    exit_code = 4
