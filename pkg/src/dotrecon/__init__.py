"""Level-set reconstruction of piecewise constant diffusion and
absorption coefficients from Neumann-to-Dirichlet boundary data."""

from .fem import SolverError, SolverSettings
from .forward import ExperimentSet, ParameterBox
from .levelset import ContrastLevels, LevelSetPair
from .mesh import Mesh, Side, build_uniform_mesh
from .phantoms import Phantom, make_excitations, make_phantom, synthesize_data
from .reconstruct import (IterationConfig, IterationRecord, IterationState,
                          Stage, StageSchedule, run_fixed, run_three_stage)

__version__ = "0.1.0"

__all__ = [
    "ContrastLevels", "ExperimentSet", "IterationConfig", "IterationRecord",
    "IterationState", "LevelSetPair", "Mesh", "ParameterBox", "Phantom",
    "Side", "SolverError", "SolverSettings", "Stage", "StageSchedule",
    "build_uniform_mesh", "make_excitations", "make_phantom",
    "run_fixed", "run_three_stage", "synthesize_data",
]
