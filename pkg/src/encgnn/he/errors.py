"""Exception hierarchy for homomorphic operations."""


class HEError(Exception):
    """Base class for backend contract violations."""


class ParameterError(HEError, ValueError):
    pass


class CapacityError(HEError, ValueError):
    """A vector does not fit in the slot capacity."""


class AlignmentError(HEError, ValueError):
    """Operands disagree on level, scale or slot count."""


class DepthExhaustedError(HEError):
    """Not enough levels remain for the requested operation."""


class RotationKeyError(HEError, KeyError):
    pass


class EncodingError(HEError, ValueError):
    pass


class LayoutError(HEError, ValueError):
    """Decrypting a slot region that rotations have invalidated."""
