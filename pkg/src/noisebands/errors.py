"""Exception taxonomy shared across the package."""


class NoiseBandsError(Exception):
    """Base class for all package errors."""


class LayoutError(NoiseBandsError):
    """Band-edge layout cannot be produced for the given configuration."""


class DesignError(NoiseBandsError):
    """FIR design failed (zero/negative bandwidth, edges out of range)."""


class CacheFormatError(NoiseBandsError):
    """A binary cache/curve/checkpoint file is corrupt or has a bad header."""


class CacheMismatchError(NoiseBandsError):
    """A cache file is well-formed but belongs to a different configuration."""


class CurveError(NoiseBandsError):
    """Control-curve data is invalid (range, length, degenerate norm)."""


class ModelError(NoiseBandsError):
    """Model configuration or input shape violation."""


class GradientError(NoiseBandsError):
    """Non-finite gradient; carries the offending parameter block name."""

    def __init__(self, block: str, message: str = ""):
        self.block = block
        super().__init__(message or f"non-finite gradient in parameter block '{block}'")


class TrainingError(NoiseBandsError):
    """Dataset preparation or optimisation step failure."""
