"""Exception types raised across the package."""


class ChainboundError(Exception):
    """Base class for all package errors."""


class DomainError(ChainboundError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class NonConvergence(ChainboundError, ArithmeticError):
    """An inner maximization ran into the edge of the domain."""


class Unbounded(ChainboundError, ArithmeticError):
    """No finite norm satisfies the moment-generating-function constraint."""


class TriangleViolation(ChainboundError, ValueError):
    """Estimated distances break the triangle inequality beyond repair tolerance."""


class SizeLimit(ChainboundError, ValueError):
    """Exact combinatorial search requested on a set that is too large."""


class NoOnset(ChainboundError, ArithmeticError):
    """No threshold on the supplied grid reaches the validity onset u0(C)."""


class NotSPD(ChainboundError, ValueError):
    """Covariance matrix is not symmetric positive semidefinite."""
