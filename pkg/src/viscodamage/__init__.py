"""Finite element simulation of quasistatic frictional contact for a
viscoelastic body with damage."""
from .config import SimConfig
from .convergence import ConvergenceReport, compute_orders, run_convergence
from .friction import FrictionModel
from .material import MaterialParams
from .mesh import ConfigurationError, Mesh, build_structured_mesh
from .solvers import NonConvergenceError, SolverTolerances
from .timestepper import Problem, TimeGrid, TimeState

__all__ = [
    "ConfigurationError", "ConvergenceReport", "FrictionModel", "MaterialParams", "Mesh",
    "NonConvergenceError", "Problem", "SimConfig", "SolverTolerances", "TimeGrid", "TimeState",
    "build_structured_mesh", "compute_orders", "run_convergence",
]
__version__ = "0.1.0"
