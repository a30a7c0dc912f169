"""Exception types shared across the package."""


class PropfuseError(Exception):
    """Base class for all package-specific errors."""


# --- ingestion ---

class BadMagicError(PropfuseError):
    """File does not start with the expected magic number."""


class TruncatedError(PropfuseError):
    """Byte payload is shorter (or longer) than the header promises."""


class ShapeMismatchError(PropfuseError):
    """Image dimensions differ from the supported 28x28 layout."""


class LabelOutOfRangeError(PropfuseError):
    """A label is >= the class count of the dataset it is bound to."""


class EmptyDatasetError(PropfuseError):
    """Operation requires at least one sample."""


# --- transforms ---

class UnknownPropertyError(PropfuseError):
    """Serialized property name does not match any known transform."""


# --- inference ---

class DivergedLossError(PropfuseError):
    """Training loss became non-finite; learning rate is too aggressive."""


# --- metrics ---

class EmptyConfusionError(PropfuseError):
    """All four confusion counts are zero."""


class DegenerateClassesError(PropfuseError):
    """Ranking statistic needs at least one positive and one negative."""


# --- fusion ---

class MissingEffectivenessError(PropfuseError):
    """A vote came from a flow with no effectiveness table row."""


class NoVotesError(PropfuseError):
    """Vote set is empty."""


class NoVotesForClassError(PropfuseError):
    """Requested class received no votes."""


# --- explanation ---

class OutOfRangeError(PropfuseError):
    """Confidence value outside [0, 1]."""


# --- knowledgebase ---

class CorruptKbError(PropfuseError):
    """Knowledgebase container failed structural or checksum validation."""


class UnsupportedVersionError(PropfuseError):
    """Knowledgebase was written by a newer format version."""


class KbIoError(PropfuseError):
    """Underlying I/O failed while reading or writing a knowledgebase."""


class MissingCountsError(PropfuseError):
    """Knowledgebase holds no confusion counts for the requested split."""


# --- cli ---

class SampleNotFoundError(PropfuseError):
    """Requested sample index is outside the dataset."""
