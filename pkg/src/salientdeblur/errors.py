"""Exception types shared across the toolkit.

Error messages are prefixed with the stage that failed (e.g. "load:",
"kernel-estimation:") so command-line diagnostics stay actionable.
"""


class DeblurError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(DeblurError, ValueError):
    """Raised when arguments violate an operation's contract."""


class NumericalError(DeblurError):
    """Raised when a solver produces a non-finite intermediate value."""


class DegenerateStructureError(DeblurError):
    """Raised when the salient-edge field is empty and cannot drive estimation."""


class TexturelessImageError(DegenerateStructureError):
    """Raised when an image has no usable structure even after threshold relaxation."""
