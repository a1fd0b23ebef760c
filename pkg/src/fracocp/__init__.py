"""P1 Galerkin solver for box-constrained optimal control of 2D Riesz
space-fractional elliptic equations with variationally discretized control."""

from fracocp.mesh import Domain, Mesh, PiecewiseLinearTrace, build_structured_mesh
from fracocp.fracops import FracOrder
from fracocp.assembly import QuadratureSpec, assemble_stiffness, assemble_mass, assemble_load
from fracocp.solver import DiscreteField, solve_spd
from fracocp.ocp import OCPProblem, OCPSolution, fixed_point_solve, project_control
from fracocp.manufactured import ManufacturedCase
from fracocp.study import run_convergence, solve_case

__version__ = "0.1.0"

__all__ = [
    "Domain",
    "Mesh",
    "PiecewiseLinearTrace",
    "build_structured_mesh",
    "FracOrder",
    "QuadratureSpec",
    "assemble_stiffness",
    "assemble_mass",
    "assemble_load",
    "DiscreteField",
    "solve_spd",
    "OCPProblem",
    "OCPSolution",
    "fixed_point_solve",
    "project_control",
    "ManufacturedCase",
    "solve_case",
    "run_convergence",
]
