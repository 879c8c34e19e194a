"""Exception types shared across the package.

The CLI maps :class:`InvalidInputError` (and its subclasses) to exit code 1
and :class:`InvariantViolation` to exit code 2.
"""


class InvalidInputError(ValueError):
    """Input rejected by a precondition check."""


class ShapeError(InvalidInputError):
    """Array shape or axis-role mismatch."""


class DatasetError(InvalidInputError):
    """Malformed sequence directory, annotation or result file."""


class InvariantViolation(RuntimeError):
    """An internal contract was broken (non-finite output, bad box, ...)."""
