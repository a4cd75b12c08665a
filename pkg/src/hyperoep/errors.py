"""Exception hierarchy shared by every hyperoep module.

The CLI maps these onto exit codes, so each failure mode gets its own class
rather than a bare ValueError with a message.
"""


class HyperOEPError(Exception):
    """Base class for all library errors."""


class DomainError(HyperOEPError, ValueError):
    """An input lies outside the domain of the operation."""


class ModelMismatchError(HyperOEPError, ValueError):
    """Two points (or a point and a hyperplane) live in different models."""


class NoZeroError(HyperOEPError):
    """The radial solution has no zero before the integration horizon."""


class IntegrationError(HyperOEPError):
    """The ODE integrator reported a failure."""


class SearchError(HyperOEPError):
    """A bracketing search ran out of range."""


class NoSolutionError(HyperOEPError):
    """Shooting found no sign change of the boundary residual."""


class GeometryError(HyperOEPError):
    """The solution vanishes before the boundary for every admissible shot."""


class ScaleDegenerateError(HyperOEPError):
    """Linear homogeneous reaction: any multiple of a solution is a solution."""


class CoverageError(HyperOEPError):
    """A finite-difference stencil leaves the region where data is available."""


class ResolutionError(HyperOEPError, ValueError):
    """A grid cannot represent the requested region at this resolution."""


class PreconditionError(HyperOEPError, ValueError):
    """A documented precondition of the operation does not hold."""
