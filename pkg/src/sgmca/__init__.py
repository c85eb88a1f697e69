"""Star-graph multimodal matching component analysis."""
from .sgm import (
    DegenerateDataError,
    LinearMap,
    PrescribedCovariance,
    SgmConfig,
    SgmModel,
    apply,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateDataError",
    "LinearMap",
    "PrescribedCovariance",
    "SgmConfig",
    "SgmModel",
    "apply",
    "train",
]
