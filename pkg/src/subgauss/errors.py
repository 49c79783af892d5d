"""Exception hierarchy shared across the package."""


class SubgaussError(Exception):
    """Base class for all errors raised by this package."""


class SingularCovariance(SubgaussError):
    """Covariance matrix is singular (or numerically indistinguishable from it)."""


class QuadratureNonConvergence(SubgaussError):
    """Adaptive quadrature exhausted its budget without meeting tolerance."""


class BoundViolation(SubgaussError):
    """A certified analytic bound was exceeded beyond numerical tolerance."""


class InsufficientSamples(SubgaussError):
    """Too few samples for the requested estimator."""


class GridTooWide(SubgaussError):
    """MGF evaluation grid would overflow exp() for the given samples."""


class DomainError(SubgaussError):
    """Argument outside the mathematical domain of the operation."""


class DimensionTooSmall(SubgaussError):
    """Matrix dimension too small for the requested partition."""


class SchemaError(SubgaussError):
    """Config document has an unknown or malformed key."""


class ValidationError(SubgaussError):
    """Config or argument value violates a documented precondition."""


class IoError(SubgaussError):
    """Filesystem problem while emitting reports (unwritable, would overwrite)."""
