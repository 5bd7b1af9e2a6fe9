"""Discriminative sub-window SVMs for telling similar glyphs apart."""
from .errors import (BoundsError, ConfigError, DegenerateLabels, EmptyGlyph, FormatError,
                     InsufficientData, SimGlyphError, SpecError)
from .geometry import Rect, WindowGrid, enumerate_windows
from .imagecore import GlyphImage, extract_seeds, normalize, sobel

__version__ = "0.1.0"

__all__ = [
    "BoundsError", "ConfigError", "DegenerateLabels", "EmptyGlyph", "FormatError",
    "InsufficientData", "SimGlyphError", "SpecError", "Rect", "WindowGrid",
    "enumerate_windows", "GlyphImage", "extract_seeds", "normalize", "sobel",
]
