"""Nonlinear-acoustics model hierarchy and validation harness."""

from .core import (
    ConservedState,
    Field,
    Grid,
    Axis,
    ModelParams,
    ProfileSolution,
    field_l2_norm,
    validate_params,
)

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "ConservedState",
    "Field",
    "Grid",
    "ModelParams",
    "ProfileSolution",
    "field_l2_norm",
    "validate_params",
    "__version__",
]
