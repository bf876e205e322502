"""Exception types raised across the package."""


class DissipscatError(Exception):
    """Base class for all package errors."""


class DegenerateDirection(DissipscatError):
    """Direction falls inside an excluded polar cap of the frame chart."""


class NotMaximalDissipative(DissipscatError):
    """Boundary space fails the dissipativity or maximality check."""


class NonPositiveEpsilon(DissipscatError):
    """Impedance parameter must be strictly positive."""


class OriginSingularity(DissipscatError):
    """Field evaluated too close to the origin."""


class AllZeroRay(DissipscatError):
    """Field channel vanishes identically along the requested ray."""


class SupportOverflow(DissipscatError):
    """Declared support does not fit inside the grid with the required margin."""


class WrapAround(DissipscatError):
    """Free evolution would carry the wavefront across the periodic box."""


class InvalidSpec(DissipscatError):
    """Solver domain specification is inconsistent."""


class InstabilityDetected(DissipscatError):
    """Discrete energy grew during a dissipative run."""


class CFLViolation(DissipscatError):
    """Time step exceeds the stability bound."""


class WindowTooShort(DissipscatError):
    """Too few samples in the fitting window."""


class NonMonotoneErrors(DissipscatError):
    """Errors did not decrease under refinement."""


class IncompleteTrace(DissipscatError):
    """Boundary traces do not cover the times needed by the kernel quadrature."""


class TooFewDirections(DissipscatError):
    """Not enough support-function samples to bound a hull."""


class ConfigError(DissipscatError):
    """Malformed or unknown experiment configuration."""
