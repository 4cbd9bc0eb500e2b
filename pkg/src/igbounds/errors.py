"""Semantic exception hierarchy.

Every numerical failure mode has a named exception so callers (and the CLI
exit-code mapping) can tell a bad input apart from a genuinely degenerate
computation.
"""


class IgboundsError(Exception):
    """Base class for all package errors."""


class OutOfDomain(IgboundsError):
    """Parameter point on or outside the admissible region."""


class DegeneratePmf(IgboundsError):
    """Model produced a pmf that is not a (near-)normalized positive vector."""


class ScoreInconsistent(IgboundsError):
    """Score rows fail the zero-mean identity beyond tolerance."""


class DimensionMismatch(IgboundsError):
    """Operands have incompatible shapes."""


class NotPsd(IgboundsError):
    """A matrix that must be positive semi-definite has a negative eigenvalue."""


class SingularInformation(IgboundsError):
    """Information matrix is singular (non-identifiable parameter)."""


class IllConditionedGram(IgboundsError):
    """Test-point Gram matrix too ill-conditioned to invert reliably."""


class PosteriorUnderflow(IgboundsError):
    """All grid log-posteriors underflow; grid and model do not match."""


class ConfigError(IgboundsError):
    """Invalid experiment configuration (unknown key, missing field, bad id)."""
