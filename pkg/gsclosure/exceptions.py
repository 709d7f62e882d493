"""Exceptions and warnings raised by gsclosure."""


class GSClosureError(Exception):
    """Base class for all errors raised by this package."""


class PlyFormatError(GSClosureError, ValueError):
    """A splat PLY file could not be decoded.

    Attributes
    ----------
    offset : int or None
        Byte offset in the input at which the problem was detected.

    prop : str or None
        The PLY property involved, if any.
    """

    def __init__(self, message, offset=None, prop=None):
        details = []
        if offset is not None:
            details.append("offset=%d" % offset)
        if prop is not None:
            details.append("property=%s" % prop)

        if details:
            message = "%s (%s)" % (message, ", ".join(details))

        super(PlyFormatError, self).__init__(message)
        self.offset, self.prop = offset, prop


class MalformedHeaderError(PlyFormatError):
    """The PLY header is missing, unterminated or not binary little endian."""


class MissingPropertyError(PlyFormatError):
    """A required vertex property is absent from the header."""


class TruncatedPayloadError(PlyFormatError):
    """The payload is shorter than the header-declared vertex count needs."""


class NonFiniteValueError(PlyFormatError):
    """A decoded or to-be-encoded value is NaN or infinite."""


class GeometryError(GSClosureError, ValueError):
    """Invalid geometric input: scales, quaternions, boxes or crops."""


class ElementError(GeometryError):
    """A per-primitive failure while building surface elements."""

    def __init__(self, index, cause):
        super(ElementError, self).__init__(
            """primitive %d: %s""" % (index, cause))
        self.index, self.cause = index, cause


class ConfigError(GSClosureError, ValueError):
    """A parameter or configuration value is outside its documented range."""


class SceneGenerationError(GSClosureError, RuntimeError):
    """Synthetic objects could not be placed without overlap."""


class ShapeMismatchError(GSClosureError, ValueError):
    """Matrices passed to the variational numerics do not conform."""


class DegenerateNormalWarning(UserWarning):
    """A near-isotropic Gaussian received a tie-broken normal."""


class NoSupportWarning(UserWarning):
    """A box encloses too few elements to be scored or refined."""


class SchemaError(GSClosureError, ValueError):
    """A JSON/CSV/TOML record does not follow the documented schema."""


class NumericDomainError(GSClosureError, ValueError):
    """An argument lies outside the domain of a numerical operation."""
