"""Exception hierarchy shared by all dcollab modules."""


class DcollabError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(DcollabError):
    """Input matrix is malformed (non-finite entries, wrong dtype, wrong ndim)."""


class InvalidRankError(DcollabError):
    """Requested rank is outside the valid range for the given matrix."""


class InvalidShapeError(DcollabError):
    """Operand shapes are inconsistent."""


class InsufficientSamplesError(DcollabError):
    """Fewer samples than the operation needs."""


class InsufficientDataError(DcollabError):
    """Not enough rows to satisfy the requested partition or pool size."""


class SingularSystemError(DcollabError):
    """Linear system is singular and no ridge damping was requested."""


class InvalidLabelError(DcollabError):
    """Class index outside the declared range."""


class DimensionalityError(DcollabError):
    """Requested intermediate dimension is not a valid reduction."""


class MissingCapabilityError(DcollabError):
    """An attack or operation needs a secret (map, pairs) that does not exist."""


class UndefinedAucError(DcollabError):
    """AUC is undefined because the labels contain a single class."""


class SchemaError(DcollabError):
    """Dataset schema is inconsistent with the file or with itself."""


class ParseError(DcollabError):
    """A cell or config entry could not be parsed; message carries the location."""


class ConfigurationError(DcollabError):
    """Run configuration is invalid for the given data."""


class FramingError(DcollabError):
    """Wire frame is truncated or violates the length contract."""


class ProtocolError(DcollabError):
    """Peer sent a malformed or unexpected message."""
