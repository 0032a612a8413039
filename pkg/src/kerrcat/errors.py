"""Exception and warning types shared across the package."""


class KerrCatError(Exception):
    """Base class for all errors raised by kerrcat."""


class InvalidParameter(KerrCatError, ValueError):
    """A constructor or operation received an out-of-range parameter."""


class DimensionMismatch(KerrCatError, ValueError):
    """Two objects live on truncated Fock spaces of different dimension."""


class StabilityViolation(KerrCatError, ValueError):
    """The requested time step exceeds the propagator's stability bound."""


class TruncationLeak(KerrCatError):
    """Population reached the top Fock levels during a run."""


class SanityViolation(KerrCatError):
    """Trace or hermiticity drifted beyond tolerance during a run."""


class ExtentTooSmall(KerrCatError, ValueError):
    """A phase-space grid does not cover the state."""


class TruncationWarning(UserWarning):
    """A state was built in a Fock space too small to hold it faithfully."""


class OracleMismatch(KerrCatError):
    """Simulator output disagrees with a closed-form reference."""
