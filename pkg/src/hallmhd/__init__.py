"""Pseudo-spectral Hall-MHD on a periodic box, with perturbation diagnostics."""

__version__ = "0.1.0"

from .data import ConstraintError, PaperParams
from .solver import SolverState, StepperConfig, evolve, step
from .spectral import GridSpec, ScalarSpectralField, SpectralField

__all__ = [
    "__version__",
    "ConstraintError",
    "GridSpec",
    "PaperParams",
    "ScalarSpectralField",
    "SolverState",
    "SpectralField",
    "StepperConfig",
    "evolve",
    "step",
]
