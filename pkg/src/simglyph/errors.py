"""Exception types raised across the package."""


class SimGlyphError(Exception):
    """Base class for all package errors."""


class EmptyGlyph(SimGlyphError, ValueError):
    pass


class InsufficientData(SimGlyphError, ValueError):
    pass


class BoundsError(SimGlyphError, IndexError):
    pass


class DegenerateLabels(SimGlyphError, ValueError):
    pass


class SpecError(SimGlyphError, ValueError):
    pass


class ConfigError(SimGlyphError, ValueError):
    """Missing or inconsistent trained components or settings."""


class FormatError(SimGlyphError, ValueError):
    """A serialized file could not be parsed."""
