"""Dense SPD solves for the discrete state and adjoint equations."""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

from fracocp.assembly import QuadratureSpec, triangle_quadrature
from fracocp.mesh import Mesh, PiecewiseLinearTrace


class NotSPDError(np.linalg.LinAlgError):
    """Cholesky factorization failed: the stiffness matrix is not SPD."""


class ResidualError(RuntimeError):
    pass


class DiscreteField:
    """P1 function given by its values at the interior nodes (zero on the boundary)."""

    def __init__(self, mesh: Mesh, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (mesh.n_dofs,):
            raise ValueError(f"expected {mesh.n_dofs} coefficients, got shape {coeffs.shape}")
        self.mesh = mesh
        self.coeffs = coeffs

    @property
    def full_coeffs(self) -> np.ndarray:
        full = np.zeros(self.mesh.n_nodes)
        full[self.mesh.interior_nodes] = self.coeffs
        return full

    def __call__(self, x, y):
        return self.mesh.evaluate(self.full_coeffs, x, y)

    def at_quadrature(self, quad: QuadratureSpec) -> np.ndarray:
        return triangle_quadrature(self.mesh, quad).p1_values(self.full_coeffs)

    def trace(self, axis: str, s: float) -> PiecewiseLinearTrace:
        return self.mesh.field_trace(self.full_coeffs, axis, s)

    def __repr__(self):
        return f"DiscreteField(n_dofs={self.mesh.n_dofs})"


class SPDSolver:
    """Cholesky factorization of a dense SPD matrix, reused across right-hand sides."""

    def __init__(self, A: np.ndarray, check_residual: bool = True):
        self.A = np.asarray(A, dtype=float)
        self.check_residual = check_residual
        try:
            self._factor = la.cho_factor(self.A, lower=True, check_finite=True)
        except la.LinAlgError as exc:
            raise NotSPDError(
                "stiffness matrix is not positive definite; check the sign of the "
                "Riesz prefactor and the orientation of the one-sided derivatives"
            ) from exc
        self._norm_inf = float(np.max(np.sum(np.abs(self.A), axis=1)))

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = la.cho_solve(self._factor, b)
        if self.check_residual:
            res = np.max(np.abs(self.A @ x - b), initial=0.0)
            bound = 1e-10 * (self._norm_inf * np.max(np.abs(x), initial=0.0) + np.max(np.abs(b), initial=0.0))
            if res > bound:
                raise ResidualError(f"residual {res:.3e} exceeds {bound:.3e}")
        return x


def solve_spd(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    return SPDSolver(A).solve(np.asarray(b, dtype=float))


def _as_solver(A) -> SPDSolver:
    return A if isinstance(A, SPDSolver) else SPDSolver(A)


def solve_state(A, M, mesh: Mesh, g, q, quad: QuadratureSpec | None = None) -> DiscreteField:
    """Discrete state: ``Lambda_h(u_h, chi) = (g + q, chi)`` for all ``chi``.

    ``g`` and ``q`` are callables or values at the triangle quadrature
    points; ``A`` may be an already factorized :class:`SPDSolver`. ``M`` is
    unused because the control never lives in the FE space.
    """
    quad = quad or QuadratureSpec()
    tq = triangle_quadrature(mesh, quad)
    rhs = tq.load(tq.evaluate(g) + tq.evaluate(q))[mesh.interior_nodes]
    return DiscreteField(mesh, _as_solver(A).solve(rhs))


def solve_adjoint(A, M, mesh: Mesh, u_h: DiscreteField, u_d, quad: QuadratureSpec | None = None) -> DiscreteField:
    """Discrete adjoint: ``Lambda_h(p_h, chi) = (u_h - u_d, chi)``; same ``A`` (self-adjoint)."""
    quad = quad or QuadratureSpec()
    tq = triangle_quadrature(mesh, quad)
    rhs = tq.load(u_h.at_quadrature(quad) - tq.evaluate(u_d))[mesh.interior_nodes]
    return DiscreteField(mesh, _as_solver(A).solve(rhs))
