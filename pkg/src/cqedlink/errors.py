"""Exception types raised by the library."""


class CqedLinkError(Exception):
    """Base class for all library errors."""


class NonPhysicalParameter(CqedLinkError, ValueError):
    """A parameter violates a physical invariant.

    Attributes:
        field: Name of the offending field.
    """

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class PreconditionViolated(CqedLinkError, ValueError):
    """An operation was called outside its domain of validity."""


class StepTooSmall(CqedLinkError, ValueError):
    """Finite-difference step below the round-off floor."""


class GridTooNarrow(CqedLinkError, ValueError):
    """Frequency grid does not cover the pulse support."""


class NotNormalized(CqedLinkError, ValueError):
    """A sampled spectrum is not unit-normalized."""


class GridMismatch(CqedLinkError, ValueError):
    """Two spectra live on different frequency grids."""


class DegenerateAntisymmetric(CqedLinkError, ValueError):
    """The antisymmetric transfer function vanishes on the pulse support."""


class NoSignal(CqedLinkError, ValueError):
    """Detection probability too small to define a heralded fidelity."""


class NotConverged(CqedLinkError, RuntimeError):
    """A numerical optimizer exhausted its budget.

    Attributes:
        result: The best partial result, if any.
    """

    def __init__(self, message: str, result=None):
        self.result = result
        super().__init__(message)


class NoRoots(CqedLinkError, ValueError):
    """No real root exists for the requested encoding condition."""


class RegimeViolation(CqedLinkError, ValueError):
    """A formula was evaluated outside the regime where it is a probability."""


class StepSizeUnderflow(CqedLinkError, RuntimeError):
    """The adaptive integrator required a vanishing step."""


class NormViolation(CqedLinkError, RuntimeError):
    """The single-excitation norm increased during integration."""


class ModesNotOrthogonal(CqedLinkError, ValueError):
    """Two temporal modes expected to be orthogonal overlap."""
