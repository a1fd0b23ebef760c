"""Single-mesh solves and mesh-refinement studies shared by the CLI and the tests."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from fracocp.assembly import QuadratureSpec, assemble_mass, assemble_stiffness
from fracocp.mesh import Mesh, build_structured_mesh
from fracocp.norms import ConvergenceReport, discrete_energy_norm, energy_error, interpolate_nodal, l2_error
from fracocp.ocp import ConvergenceError, OCPSolution, evaluate_cost, fixed_point_solve


def has_exact(case) -> bool:
    """True when the case carries an exact triple with closed-form derivatives."""
    return all(hasattr(case, name) for name in ("exact_q", "u", "p"))


@dataclass
class MeshResult:
    nx: int
    mesh: Mesh
    solution: OCPSolution
    cost: float
    stiffness: np.ndarray
    errors: dict | None = None
    surrogate: dict | None = None
    wall_time: float = 0.0

    @property
    def h(self) -> float:
        return self.mesh.h_leg


def mesh_errors(case, mesh: Mesh, sol: OCPSolution, quad: QuadratureSpec) -> dict:
    order = case.order
    k1, k2 = case.kappa1, case.kappa2
    return {
        "err_q_L2": l2_error(mesh, sol.q_h, case.exact_q, quad),
        "err_p_eng": energy_error(mesh, sol.p_h, case.p, order, k1, k2, quad),
        "err_u_eng": energy_error(mesh, sol.u_h, case.u, order, k1, k2, quad),
    }


def solve_case(case, nx: int, quad: QuadratureSpec | None = None, tol: float = 1e-12,
               max_iter: int = 500, relaxation: float = 1.0, initial_control=None) -> MeshResult:
    """Assemble, run the fixed-point iteration and (when possible) measure errors on an nx-by-nx mesh."""
    quad = quad or QuadratureSpec()
    t0 = time.perf_counter()
    problem = case.problem()
    mesh = build_structured_mesh(case.domain, nx, nx)
    A = assemble_stiffness(mesh, problem.order, problem.kappa1, problem.kappa2)
    sol = fixed_point_solve(problem, mesh, quad, tol=tol, max_iter=max_iter, relaxation=relaxation,
                            initial_control=initial_control, stiffness=A)
    cost = evaluate_cost(mesh, sol.u_h, sol.q_h, problem.u_d, problem.gamma, quad)
    errors = surrogate = None
    if has_exact(case):
        errors = mesh_errors(case, mesh, sol, quad)
        M = assemble_mass(mesh)
        surrogate = {
            "u": discrete_energy_norm(A, M, interpolate_nodal(mesh, case.u).coeffs - sol.u_h.coeffs),
            "p": discrete_energy_norm(A, M, interpolate_nodal(mesh, case.p).coeffs - sol.p_h.coeffs),
        }
    return MeshResult(nx, mesh, sol, cost, A, errors, surrogate, time.perf_counter() - t0)


class StudyAborted(RuntimeError):
    """A mesh failed; ``report`` holds the rows finished before it."""

    def __init__(self, message: str, report: ConvergenceReport, failed_nx: int, cause: Exception):
        super().__init__(message)
        self.report = report
        self.failed_nx = failed_nx
        self.cause = cause


def _solve_one(args):
    case, nx, quad, tol, max_iter, relaxation = args
    try:
        return solve_case(case, nx, quad, tol, max_iter, relaxation)
    except ConvergenceError as exc:
        return exc


def run_convergence(case, nxs, quad: QuadratureSpec | None = None, tol: float = 1e-12,
                    max_iter: int = 500, relaxation: float = 1.0, jobs: int = 1,
                    on_result=None) -> ConvergenceReport:
    """Solve on every mesh in ``nxs`` (refining order) and collect errors and observed orders.

    With ``jobs > 1`` meshes run in worker processes; rows are still merged
    in the order of ``nxs``. ``on_result(result)`` sees each finished mesh.
    """
    nxs = [int(n) for n in nxs]
    if len(nxs) < 2:
        raise ValueError("a convergence study needs at least two mesh sizes")
    if len(set(nxs)) != len(nxs):
        raise ValueError("mesh sizes must be distinct")
    if not has_exact(case):
        raise ValueError("convergence studies need a problem with exact solutions")
    quad = quad or QuadratureSpec()
    tasks = [(case, nx, quad, tol, max_iter, relaxation) for nx in nxs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_solve_one, tasks))
    else:
        outcomes = []
        for t in tasks:
            outcomes.append(_solve_one(t))
            if isinstance(outcomes[-1], Exception):
                break

    report = ConvergenceReport(metadata={
        "alpha": case.alpha, "gamma": case.gamma, "kappa1": case.kappa1, "kappa2": case.kappa2,
        "v1": case.v1, "v2": case.v2, "meshes": nxs,
        "quadrature": (quad.n_transverse, quad.n_axial), "tol": tol,
        "iterations": [], "wall_times": [], "cost": [], "partial": False,
    })
    for nx, res in zip(nxs, outcomes):
        if isinstance(res, Exception):
            report.metadata["partial"] = True
            raise StudyAborted(f"mesh nx={nx} failed: {res}", report, nx, res)
        e = res.errors
        report.add(res.h, e["err_q_L2"], e["err_p_eng"], e["err_u_eng"])
        report.metadata["iterations"].append(res.solution.iterations)
        report.metadata["wall_times"].append(res.wall_time)
        report.metadata["cost"].append(res.cost)
        if on_result is not None:
            on_result(res)
    return report
