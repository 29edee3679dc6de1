"""Exception types shared across the toolkit."""


class ShadowBenchError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatchError(ShadowBenchError, ValueError):
    """Arrays that must share dimensions do not."""


class ImageReadError(ShadowBenchError):
    """Base for image decoding failures (missing files raise FileNotFoundError)."""


class UnsupportedImageError(ImageReadError):
    """File is not a PNG, or has an unsupported bit depth / channel layout."""


class CorruptImageError(ImageReadError):
    """PNG signature was fine but the stream failed to decode."""


class EmptyMaskError(ShadowBenchError, ValueError):
    """Mask has no foreground pixels where foreground is required."""


class MultipleComponentsError(ShadowBenchError, ValueError):
    """Mask has more than one connected foreground component."""


class MaskScaleError(ShadowBenchError):
    """Area target cannot be reached by rescaling the mask on the canvas."""


class EmptyRegionError(ShadowBenchError, ValueError):
    """Metric requested over a region containing no pixels."""


class DegenerateLandmarksError(ShadowBenchError, ValueError):
    """Landmark set cannot be normalized (e.g. coincident eye corners)."""


class OracleError(ShadowBenchError):
    """Detector oracle failed; carries the attack iteration when known."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None
                         else f"{message} (iteration {iteration})")
        self.iteration = iteration


class ConfigError(ShadowBenchError):
    """Run configuration is missing or inconsistent."""
