"""Exception types raised across the package."""


class WaveguideLabError(Exception):
    """Base class for all errors raised by waveguide_lab."""


class RegimeError(WaveguideLabError, ValueError):
    """Inputs violate the (delta, T) regime or a structural hypothesis."""


class TransversalityError(RegimeError):
    """Frequency supports are not separated enough (or are untagged)."""


class LatticeMismatchError(WaveguideLabError, ValueError):
    """Two frequency functions do not live on the same uniform lattice."""


class WindowTooSmallError(WaveguideLabError, ValueError):
    """A physical truncation window cuts off non-negligible mass."""


class NonConvergenceError(WaveguideLabError, ArithmeticError):
    """A refinement loop failed to stabilise within its budget."""


class QuadratureFailure(NonConvergenceError):
    """A quantity that must be nonnegative came out significantly negative."""


class DerivativeOracleError(NonConvergenceError):
    """Finite-difference derivative estimates disagree under refinement."""
