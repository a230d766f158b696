"""Exception hierarchy shared by all decorr modules.

Every error carries an ``exit_code`` used by the CLI: 2 for parse
failures, 3 for bounds/validation failures, 4 for I/O, 5 for violated
preconditions.
"""

from __future__ import annotations


class DecorrError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ParseError(DecorrError):
    """Malformed input file: bad JSON, missing required field."""

    exit_code = 2


class EmptyTableError(ParseError):
    """Match table file contains no entries."""


class EmptyPromptSetError(ParseError):
    """Prompt file contains no usable templates."""


class ValidationError(DecorrError):
    """Input parsed but violates a documented invariant."""

    exit_code = 3


class BoundsError(ValidationError):
    """Bounding box exceeds its image by more than the clamp tolerance."""


class UnknownClassError(ValidationError):
    """Category name not present in the class vocabulary."""


class DanglingImageError(ValidationError):
    """Caption references an image id that is not in the bundle."""


class UnknownCaptionError(ValidationError):
    """Chunk record references a caption id that is not in the bundle."""


class SpanOutOfRangeError(ValidationError):
    """Noun-phrase span indices fall outside the caption's tokens."""


class OverlappingSpansError(ValidationError):
    """Noun-phrase spans within one caption overlap."""


class MissingAnnotationError(ValidationError):
    """Annotated-pairs matching hit a span without a class annotation."""


class DimensionMismatchError(ValidationError):
    """Rasters or vector sets with incompatible dimensions."""


class ZeroNormError(ValidationError):
    """Cosine similarity requested for a zero-norm vector."""


class EmptyDenominatorError(ValidationError):
    """Overlap ratio requested against an empty mask."""


class EmptyRelevantSetError(ValidationError):
    """Recall requested for a query with no relevant gallery ids."""


class RatioOutOfRangeError(ValidationError):
    """Sampling ratio outside (0, 1]."""


class UnsupportedMethodError(ValidationError):
    """Caption-synthesis method not performed by this component."""


class PreconditionError(DecorrError):
    """Operation invoked outside its stated precondition."""

    exit_code = 5


class EmptyGalleryError(PreconditionError):
    """Gallery construction selected zero captions."""


class EmptyMaskWarning(UserWarning):
    """Fill requested for an empty mask; image returned unchanged."""
