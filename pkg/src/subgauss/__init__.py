"""Numerical laboratory for subgaussian concentration of bounded maps of Gaussians."""

from .errors import (
    BoundViolation,
    DimensionTooSmall,
    DomainError,
    GridTooWide,
    InsufficientSamples,
    IoError,
    QuadratureNonConvergence,
    SchemaError,
    SingularCovariance,
    SubgaussError,
    ValidationError,
)
from .gaussian_core import (
    CovarianceSpec,
    CovarianceSplit,
    SampleBatch,
    condition_number,
    sample_gaussian,
    sample_split_gaussian,
    split_covariance,
)
from .nonlinearity import (
    BoundedMap,
    SmoothedMean,
    get_map,
    lipschitz_certificate,
    smoothed_mean,
    smoothed_mean_derivative,
)
from .psi2_estimation import (
    MgfFit,
    Psi2Estimate,
    mgf_sigma,
    psi2_scalar,
    psi2_vector,
    triangle_combine,
)

__version__ = "0.1.0"

__all__ = [
    "BoundViolation",
    "BoundedMap",
    "CovarianceSpec",
    "CovarianceSplit",
    "DimensionTooSmall",
    "DomainError",
    "GridTooWide",
    "InsufficientSamples",
    "IoError",
    "MgfFit",
    "Psi2Estimate",
    "QuadratureNonConvergence",
    "SampleBatch",
    "SchemaError",
    "SingularCovariance",
    "SmoothedMean",
    "SubgaussError",
    "ValidationError",
    "condition_number",
    "get_map",
    "lipschitz_certificate",
    "mgf_sigma",
    "psi2_scalar",
    "psi2_vector",
    "sample_gaussian",
    "sample_split_gaussian",
    "smoothed_mean",
    "smoothed_mean_derivative",
    "split_covariance",
    "triangle_combine",
    "__version__",
]
