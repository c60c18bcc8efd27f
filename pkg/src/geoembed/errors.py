"""Exception types raised by the public geoembed API."""


class GeoembedError(Exception):
    """Base class for all geoembed errors."""


class DimensionMismatchError(GeoembedError, ValueError):
    """Operands have incompatible shapes."""


class DegenerateEmbeddingError(GeoembedError, ValueError):
    """An embedding vector has (near-)zero norm and cannot be normalized."""


class ConfigError(GeoembedError, ValueError):
    """Invalid configuration value or inconsistent recipe."""


class FeatureFileError(GeoembedError, ValueError):
    """A feature file cannot be parsed; `line` is the 1-based offender."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CheckpointError(GeoembedError, ValueError):
    """A model checkpoint file is malformed or inconsistent."""


class SamplingError(GeoembedError, RuntimeError):
    """No valid tuple exists for a constraint, or retries were exhausted."""


class StaleTapeError(GeoembedError, RuntimeError):
    """A backward pass was given a tape from a different forward pass."""


class TrainingDivergedError(GeoembedError, RuntimeError):
    """Training produced a non-finite loss."""
