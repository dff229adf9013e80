"""Pseudo-spectral Euler solvers with Lax-pair diagnostics on periodic domains."""

from .errors import (
    BlowUpError,
    ConfigurationError,
    DegenerateInputError,
    ElaxError,
    GridMismatchError,
    IllConditionedBasisError,
    NumericalError,
    UsageError,
)
from .euler2d import FlowState2D, NamedInitialCondition, run_simulation2d
from .euler3d import FlowState3D, run_simulation3d
from .spectral import FourierField, GridSpec

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "ConfigurationError",
    "DegenerateInputError",
    "ElaxError",
    "FlowState2D",
    "FlowState3D",
    "FourierField",
    "GridMismatchError",
    "GridSpec",
    "IllConditionedBasisError",
    "NamedInitialCondition",
    "NumericalError",
    "UsageError",
    "run_simulation2d",
    "run_simulation3d",
]
