"""Unfitted hybrid high-order solver for elliptic interface problems.

Pipeline: ``generate_cartesian`` / ``read_mesh`` -> ``discretize`` (cut
geometry and agglomeration) -> ``solve_problem`` -> ``compute_errors``.
"""

from .estimator import UnfittedHHO
from .levelset import parse_levelset
from .mesh import PolyMesh, generate_cartesian, read_mesh, write_mesh
from .problem import InterfaceProblem
from .solver import Discretization, Solution, discretize, solve_problem
from .verify import compute_errors, convergence_study, make_case

__all__ = [
    "Discretization",
    "InterfaceProblem",
    "PolyMesh",
    "Solution",
    "UnfittedHHO",
    "compute_errors",
    "convergence_study",
    "discretize",
    "generate_cartesian",
    "make_case",
    "parse_levelset",
    "read_mesh",
    "solve_problem",
    "write_mesh",
]

__version__ = "0.1.0"
