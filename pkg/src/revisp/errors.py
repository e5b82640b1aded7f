"""Exception types raised across the package."""


class RevispError(Exception):
    """Base class for all package errors."""


class DimensionError(RevispError, ValueError):
    """Array shape does not satisfy the required contract."""


class DomainError(RevispError, ValueError):
    """Input values fall outside the function's domain."""


class SingularMatrixError(RevispError, ValueError):
    """A color matrix is not invertible."""


class IllConditionedFitError(RevispError):
    """Least-squares design matrix is rank deficient.

    ``candidate`` names the gamma candidate whose regression failed, or is
    ``None`` for single-matrix fits.
    """

    def __init__(self, message, candidate=None):
        super().__init__(message)
        self.candidate = candidate


class EmptyDatasetError(RevispError, ValueError):
    pass


class AlignmentError(RevispError, ValueError):
    """RGB and RAW arrays do not pair at a 2:1 spatial ratio."""


class FormatError(RevispError, ValueError):
    """Malformed file contents."""


class BadMagicError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class ChannelCountError(FormatError):
    pass


class CodeRangeError(FormatError):
    pass


class UnsupportedImageError(FormatError):
    pass


class MetadataError(FormatError):
    pass


class MissingKeyError(MetadataError):
    pass


class ArityError(MetadataError):
    pass


class SingularMetadataError(MetadataError, SingularMatrixError):
    pass
