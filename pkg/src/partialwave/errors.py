"""Shared exception types."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ShapeError(ValueError):
    """Mismatched grid / coefficient shapes."""


class ResolutionError(RuntimeError):
    """Grid too coarse for the requested band limit or oscillation."""


class HypothesisViolationError(ValueError):
    """A potential or datum fails the decay hypotheses it is required to satisfy."""


class NumericalError(RuntimeError):
    """A linear solve or iteration failed."""
