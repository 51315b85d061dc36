"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A numeric argument is outside its valid range."""


class TrackFormatError(ValueError):
    """A track file cannot be parsed."""


class ClosureError(ValueError):
    """A course segment list does not come back to its start point."""


class StateError(ValueError):
    """A vehicle state contains non-finite values."""


class ControllerFault(RuntimeError):
    """A controller produced or received non-finite data."""


class TrainingFault(RuntimeError):
    """A training update produced a non-finite loss."""


class CheckpointError(ValueError):
    """A checkpoint file is missing, truncated, or dimensionally incompatible."""


class MetricsError(ValueError):
    """Metrics were requested for an empty episode log."""


class ConfigError(ValueError):
    """A config file cannot be parsed or contains an unknown value."""
