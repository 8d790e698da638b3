"""Doubly nonlinear degenerate diffusion with inhomogeneous density on model manifolds."""
from .errors import (
    FitError,
    InvalidAssumptionError,
    InvalidExperimentError,
    InvalidSpecError,
    NumericError,
    RangeError,
    RegimeError,
    SchemeFailureError,
    StiffnessError,
)
from .geometry import DensityProfile, GeometricBundle, ManifoldProfile, MonotoneTable

__version__ = "0.1.0"
