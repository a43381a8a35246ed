"""Exception hierarchy shared across the package."""


class CrystalEmbedError(Exception):
    """Base class for all package errors."""


class ParseError(CrystalEmbedError):
    """Raised when an input file or record cannot be parsed."""


class ValidationError(CrystalEmbedError):
    """Raised when a value violates a documented invariant or precondition."""


class ShapeError(CrystalEmbedError):
    """Raised on tensor shape mismatches."""


class NumericsError(CrystalEmbedError):
    """Raised when a computation produces non-finite values."""


class FeaturizationError(CrystalEmbedError):
    """Raised when node features cannot be built for a structure."""
