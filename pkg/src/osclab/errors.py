"""Exception hierarchy shared by every osclab module."""


class OsclabError(Exception):
    """Base class for all errors raised by osclab."""


class DomainError(OsclabError, ValueError):
    """An argument lies outside the admissible domain of an operation."""


class CapabilityError(OsclabError):
    """The requested derivative order exceeds what the phase oracle supports."""


class FoldTraceError(OsclabError):
    """Newton continuation along the fold curve failed."""

    def __init__(self, message, x1=None):
        super().__init__(message)
        self.x1 = x1


class DecompositionError(OsclabError):
    """The normal-form factor b is discontinuous across the fold."""


class AmbiguityError(OsclabError):
    """Derivative test and log-log slope test disagree on a vanishing order."""


class ResolutionError(OsclabError):
    """The quadrature budget ran out before the oscillation was resolved."""

    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


class DegeneracyError(OsclabError):
    """The x2 stationary-phase reduction is invalid (Newton failure or flat Hessian)."""


class DataError(OsclabError, ValueError):
    """Input data for a fit is unusable (non-positive or too few values)."""


class ProfileError(OsclabError):
    """A surface profile lacks a tabulation required by the caller."""


class InsufficientDataError(OsclabError):
    """Too few certified points to fit a growth exponent."""


class ConfigError(OsclabError):
    """Malformed or inconsistent experiment configuration."""


class PhaseLoadError(OsclabError):
    """A phase could not be loaded from the corpus or a coefficient file."""
