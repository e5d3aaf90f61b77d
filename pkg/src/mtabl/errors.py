"""Exception types shared across the package."""


class MtablError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(MtablError, ValueError):
    """Operand shapes do not conform."""


class ConfigurationError(MtablError, ValueError):
    """Invalid layer, network or run configuration, caught at construction time."""


class ConstraintError(MtablError, ValueError):
    """A parameter sits outside its admissible range."""


class DataError(MtablError, ValueError):
    """Input data is malformed or outside the expected domain."""


class FormatError(DataError):
    """A file does not match the expected on-disk format."""


class ParseError(FormatError):
    """A token in a text file could not be parsed as a number."""


class CacheMismatchError(MtablError, RuntimeError):
    """Backward was called with a cache that does not match the parameters."""


class DivergenceError(MtablError, RuntimeError):
    """Training produced a non-finite loss."""
