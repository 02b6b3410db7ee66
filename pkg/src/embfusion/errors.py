"""Exception hierarchy shared across the toolkit."""


class EmbFusionError(Exception):
    """Base class for all toolkit errors."""


class DimMismatchError(EmbFusionError):
    """Embedding dimensions disagree between fusion sources."""


class AlignmentError(EmbFusionError):
    """Sample ids do not line up across matrices or against a manifest."""


class ConfigError(EmbFusionError):
    """Invalid configuration value (unknown method, bad grid, ...)."""


class ValidationError(EmbFusionError):
    """Data violates a type invariant (NaN rows, duplicate ids, ...)."""


class FormatError(EmbFusionError):
    """File does not conform to the expected binary layout."""


class VersionError(FormatError):
    """File declares a format version newer than this reader supports."""


class ChecksumError(FormatError):
    """Stored checksum does not match the file contents."""


class SchemaError(EmbFusionError):
    """Manifest CSV violates the expected schema."""


class DuplicateIdError(SchemaError):
    """Manifest contains the same sample id twice."""


class ShapeError(EmbFusionError):
    """Array shapes are incompatible with the operation."""


class EmptyEvalError(EmbFusionError):
    """Metric requested over zero evaluated samples."""


class StratificationError(EmbFusionError):
    """A class has too few samples to fill every fold."""


class DegenerateDataError(EmbFusionError):
    """Training data contains fewer than two classes."""
