"""Numerical laboratory for the radial defocusing wave equation
u_tt - Laplace u = -|u|^(p-1) u in R^3, 3 < p < 5."""

from .field import (
    DataFamily,
    DataKind,
    FieldError,
    Grid,
    ModelParams,
    RadialState,
    WeightKind,
    critical_kappa,
    critical_regularity,
    make_grid,
    quad,
    sample_data,
)
from .linear_prop import FreeEvolver, free_evolve, linear_energy
from .stepper import StepperConfig, StepperError, evolve, nonlinear_force, step

__version__ = "0.1.0"
