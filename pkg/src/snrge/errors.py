"""Exception types shared across the package."""


class SnrgeError(Exception):
    """Base class for all package errors."""


class DataError(SnrgeError):
    """Bad or missing input data (files, manifests, sources)."""


class WavError(DataError):
    """A WAV file could not be used as audio input."""


class MultiChannelError(WavError):
    """WAV payload has more than one channel; downmixing is not performed."""


class UnsupportedEncodingError(WavError):
    """WAV payload is neither 16-bit integer PCM nor 32-bit float."""


class NumericError(SnrgeError):
    """A numeric procedure failed (undefined statistic, divergence)."""


class UndefinedCorrelationError(NumericError):
    """Pearson correlation requested for a zero-variance sequence."""
