"""decaylab: energy-conserving simulation of the 1+1d defocusing semilinear
wave equation with machine-checkable audits of its decay and flux estimates."""

from .core import (
    ConfigError,
    FieldState,
    Grid1D,
    InitialDataSpec,
    ModelParams,
    MultiplierParams,
    build_grid,
    sample_initial_data,
    validate_params,
)
from .solver import (
    SchemeChoice,
    SolverError,
    dalembert_eval,
    discrete_energy,
    init_state,
    reference_step,
    run,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "FieldState",
    "Grid1D",
    "InitialDataSpec",
    "ModelParams",
    "MultiplierParams",
    "SchemeChoice",
    "SolverError",
    "build_grid",
    "dalembert_eval",
    "discrete_energy",
    "init_state",
    "reference_step",
    "run",
    "sample_initial_data",
    "step",
    "validate_params",
    "__version__",
]
