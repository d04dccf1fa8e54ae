"""Exception hierarchy shared by all modules."""


class WannError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(WannError, ValueError):
    """An input object violates a documented invariant."""


class CapacityError(WannError, ValueError):
    """A request asks for more samples/neighbors than are available."""


class FormatError(WannError, ValueError):
    """A binary file does not carry the expected magic or version."""


class CorruptionError(WannError, ValueError):
    """A binary file has the right header but a damaged payload."""
