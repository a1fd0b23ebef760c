"""Variationally discretized optimal control: projection and fixed-point driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from fracocp.assembly import QuadratureSpec, assemble_stiffness, triangle_quadrature
from fracocp.fracops import FracOrder
from fracocp.mesh import Mesh
from fracocp.solver import DiscreteField, SPDSolver, solve_adjoint, solve_state

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, update_norm: float, iterations: int):
        super().__init__(message)
        self.update_norm = update_norm
        self.iterations = iterations


@dataclass(frozen=True)
class OCPProblem:
    order: FracOrder
    kappa1: float
    kappa2: float
    gamma: float
    v1: float
    v2: float
    g: Field
    u_d: Field

    def __post_init__(self):
        if not isinstance(self.order, FracOrder):
            object.__setattr__(self, "order", FracOrder(self.order))
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.v1 < self.v2:
            raise ValueError(f"need v1 < v2, got [{self.v1}, {self.v2}]")
        if self.kappa1 <= 0 or self.kappa2 <= 0:
            raise ValueError("kappa1 and kappa2 must be positive")


def project_control(p_value, gamma: float, v1: float, v2: float):
    """Pointwise projection ``max(v1, min(-p / gamma, v2))``."""
    return np.maximum(v1, np.minimum(-np.asarray(p_value, dtype=float) / gamma, v2))


@dataclass
class OCPSolution:
    u_h: DiscreteField
    p_h: DiscreteField
    gamma: float
    v1: float
    v2: float
    iterations: int
    final_update_norm: float
    history: list = field(default_factory=list, repr=False)

    def q_h(self, x, y):
        """The implicit control ``P_K(-p_h / gamma)`` at arbitrary points."""
        return project_control(self.p_h(x, y), self.gamma, self.v1, self.v2)

    def q_h_at_quadrature(self, quad: QuadratureSpec) -> np.ndarray:
        return project_control(self.p_h.at_quadrature(quad), self.gamma, self.v1, self.v2)


def evaluate_cost(mesh: Mesh, u_h, q_h, u_d, gamma: float, quad: QuadratureSpec | None = None) -> float:
    """``1/2 ||u_h - u_d||^2 + gamma/2 ||q_h||^2`` by triangle quadrature.

    Every field may be a callable or its values at the quadrature points.
    """
    quad = quad or QuadratureSpec()
    tq = triangle_quadrature(mesh, quad)
    u = u_h.at_quadrature(quad) if isinstance(u_h, DiscreteField) else tq.evaluate(u_h)
    misfit = u - tq.evaluate(u_d)
    q = tq.evaluate(q_h)
    return 0.5 * tq.integrate(misfit**2) + 0.5 * gamma * tq.integrate(q**2)


def fixed_point_solve(problem: OCPProblem, mesh: Mesh, quad: QuadratureSpec | None = None,
                      tol: float = 1e-12, max_iter: int = 500, relaxation: float = 1.0,
                      initial_control=None, stiffness: np.ndarray | None = None,
                      callback=None) -> OCPSolution:
    """Fixed-point iteration ``q <- (1 - theta) q + theta P_K(-p_h(q) / gamma)``.

    The control is carried as values at the triangle quadrature points. The
    stiffness matrix is assembled (unless given) and factorized once.
    Iteration stops when the quadrature L2 norm of the control update drops
    to ``tol``; ``callback(k, update_norm, cost)`` is called every step.
    """
    quad = quad or QuadratureSpec()
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0.0 < relaxation <= 1.0:
        raise ValueError("relaxation must lie in (0, 1]")
    tq = triangle_quadrature(mesh, quad)
    if stiffness is None:
        stiffness = assemble_stiffness(mesh, problem.order, problem.kappa1, problem.kappa2, quad)
    solver = SPDSolver(stiffness)

    g_vals = tq.evaluate(problem.g)
    ud_vals = tq.evaluate(problem.u_d)
    if initial_control is None:
        q = np.full_like(tq.x, 0.5 * (problem.v1 + problem.v2))
    else:
        q = tq.evaluate(initial_control).copy()

    history = []
    update = np.inf
    for k in range(1, max_iter + 1):
        u_h = solve_state(solver, None, mesh, g_vals, q, quad)
        p_h = solve_adjoint(solver, None, mesh, u_h, ud_vals, quad)
        cost = evaluate_cost(mesh, u_h, q, ud_vals, problem.gamma, quad)
        q_new = project_control(p_h.at_quadrature(quad), problem.gamma, problem.v1, problem.v2)
        if relaxation != 1.0:
            q_new = (1.0 - relaxation) * q + relaxation * q_new
        update = np.sqrt(tq.integrate((q_new - q) ** 2))
        history.append((k, update, cost))
        logger.debug("iteration %d: update %.3e cost %.12e", k, update, cost)
        if callback is not None:
            callback(k, update, cost)
        q = q_new
        if update <= tol:
            return OCPSolution(u_h, p_h, problem.gamma, problem.v1, problem.v2, k, update, history)
    raise ConvergenceError(
        f"fixed-point iteration did not converge in {max_iter} steps (last update {update:.3e}); "
        "try relaxation < 1",
        update, max_iter,
    )
