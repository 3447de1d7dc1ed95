"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class FrameError(Exception):
    """Base class for all package errors."""


class DomainError(FrameError, ValueError):
    """Input lies outside the domain an operation is defined on."""


class PreconditionError(FrameError, ValueError):
    """A documented precondition of an operation does not hold.

    ``witness`` optionally carries a point or value exhibiting the failure.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ConstructionError(FrameError):
    """A construction hypothesis failed.

    Parameters
    ----------
    message : str
        Human readable description.
    hypothesis : str, optional
        Short label of the failed hypothesis, e.g. ``"(b)"``.
    witness : object, optional
        Point or value exhibiting the failure.
    """

    def __init__(self, message, hypothesis=None, witness=None):
        super().__init__(message)
        self.hypothesis = hypothesis
        self.witness = witness


class NumericError(FrameError, ArithmeticError):
    """Singular matrix or similar numerical breakdown."""


class ResolutionError(FrameError):
    """The discretisation cannot resolve the requested quantity."""


class ConditioningError(FrameError):
    """A Gram matrix is too ill conditioned on the retained span."""

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class RPUHoleError(FrameError):
    """The sum of squared partition members vanishes inside the working region."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ConfigurationError(FrameError, ValueError):
    """Unknown or inconsistent configuration."""
