"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented process exit codes without a lookup table.
"""


class EdgeSketchError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 2


class InvalidWeightError(EdgeSketchError, ValueError):
    """Edge weight or exponential rate is not a finite positive number."""


class ReservedIdError(EdgeSketchError, ValueError):
    """Node id 0 is reserved for the empty-edge sentinel."""


class StreamError(EdgeSketchError, ValueError):
    """An invalid element was found while consuming an edge stream.

    Attributes:
        position: zero-based index of the offending stream element.
    """

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class ParseError(StreamError):
    """Malformed line in a text edge stream."""


class IncompatibleSketchError(EdgeSketchError, ValueError):
    """Sketches or stores built with different parameters were combined."""

    exit_code = 3


class NoDataError(EdgeSketchError, ValueError):
    """An estimator was asked about a sketch that has seen no edges."""


class MissingNodeError(EdgeSketchError, KeyError):
    """A node id has no sketch in the store."""

    def __str__(self):
        return Exception.__str__(self)


class UnsupportedConfigurationError(EdgeSketchError, ValueError):
    """The requested operation is undefined for this store configuration."""


class StaleCacheError(EdgeSketchError, RuntimeError):
    """A cached aggregate was used after the partition changed."""


class CorruptFileError(EdgeSketchError, ValueError):
    """Binary sketch file failed validation (magic, size or checksum)."""


class ContractViolationError(EdgeSketchError, RuntimeError):
    """An internal API was driven out of its documented order."""
