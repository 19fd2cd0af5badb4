"""
Errors and numerical warnings raised by the specshift package.
"""


class SpecShiftError(Exception):
    """Root of every specshift failure."""


class InputError(SpecShiftError, ValueError):
    """Malformed operator, file or parameter."""


class DomainError(SpecShiftError, ValueError):
    """A quantity was requested outside the domain where it is defined."""


class TruncationError(InputError):
    """The finite time interval or the Fourier band does not resolve the request."""


class NotFredholmError(DomainError):
    pass


class NonConvergenceError(SpecShiftError, RuntimeError):
    """An iterative procedure exhausted its budget."""


class LebesguePointError(NonConvergenceError):
    """The Lebesgue-point estimator failed where a Lebesgue point is required."""


class InvariantViolation(SpecShiftError, RuntimeError):
    """A mathematical identity that must hold was found violated."""


class InconsistencyError(SpecShiftError):
    pass


class DegeneratePathError(SpecShiftError):
    """Spectral flow partition refinement reached its floor."""


class SpecShiftWarning(UserWarning):
    pass


class PrecisionWarning(SpecShiftWarning):
    """Evaluation point too close to an eigenvalue for the requested epsilon."""


class EndpointCollisionWarning(SpecShiftWarning):
    pass


class BoundaryDegeneracyWarning(SpecShiftWarning):
    """A(±T) has an eigenvalue at 0, the APS projection is ambiguous."""


class IllSeparatedKernelWarning(SpecShiftWarning):
    pass


class FiniteIntervalWarning(SpecShiftWarning):
    """Semigroup time beyond the horizon the finite interval can represent."""


class NonFredholmWarning(SpecShiftWarning):
    pass


class BoundaryKernelWarning(SpecShiftWarning):
    pass
