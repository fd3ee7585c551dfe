"""Revenue-maximizing harvest schedules for multi-species fisheries with fixed terminal stocks."""

from ._jit import NUMBA_ENABLED
from .ccd import Solution, initial_guess, maximize_species, objective, solve
from .errors import (
    DomainError,
    HarvestOptError,
    InfeasiblePathError,
    InfeasibleTargetError,
    NonConvergenceError,
    ScenarioError,
    SolverError,
)
from .scenario import Scenario, SolverSettings, base_case, load, parse, serialize, validate
from .shooting import ShootingResult, shoot, sweep_K
from .trajectory import Grid, SpeciesPath, Trajectory, build_path

__version__ = "0.1.0"
