"""Oracle suite behind ``fracocp verify``.

Every check compares a production code path against an independent
computation and reports pass/fail with the measured discrepancy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from fracocp.assembly import (
    OracleFailure,
    QuadratureSpec,
    assemble_mass,
    assemble_stiffness,
    oracle_stiffness_entry,
    triangle_quadrature,
)
from fracocp.fracops import riesz_bubble, rl_left_pwl, rl_right_pwl
from fracocp.manufactured import ManufacturedCase
from fracocp.mesh import Domain, PiecewiseLinearTrace, build_structured_mesh
from fracocp.oracles import grunwald_riesz_richardson, laplacian_stiffness, marchaud_left, marchaud_right
from fracocp.solver import SPDSolver
from fracocp.study import solve_case

FAMILIES = ("fracops", "riesz", "stiffness", "laplace", "spd", "quadrature", "kkt", "adjoint")


@dataclass
class CheckResult:
    family: str
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.family}/{self.name}: {self.value:.3e} (tol {self.tolerance:.1e})"


def random_trace(rng: np.random.Generator, lo: float = 0.0, hi: float = 1.0) -> PiecewiseLinearTrace:
    """Random continuous pwl function vanishing at the ends of its support."""
    n = int(rng.integers(1, 6))
    t = np.sort(rng.uniform(lo, hi, n + 2))
    vals = np.concatenate(([0.0], rng.uniform(-1.0, 1.0, n), [0.0]))
    return PiecewiseLinearTrace(t, vals)


def check_fracops(quad=None, n_cases: int = 50, seed: int = 7):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        tr = random_trace(rng)
        mu = float(rng.uniform(0.5, 0.98))
        x = float(rng.uniform(0.0, 1.0))
        f = lambda w, tr=tr: float(tr(w))
        bps = tuple(tr.breakpoints)
        for closed, ref in ((rl_left_pwl(tr, mu, x), marchaud_left(f, mu, x, 0.0, bps)),
                            (rl_right_pwl(tr, mu, x), marchaud_right(f, mu, x, 1.0, bps))):
            if ref == 0.0:
                worst = max(worst, abs(float(closed)))
            else:
                worst = max(worst, abs(float(closed) - ref) / abs(ref))
    yield CheckResult("fracops", f"pwl-vs-quadrature[{n_cases} cases]", worst <= 1e-8, worst, 1e-8)
    # a linear ramp on [0, x] has left derivative x^(1-mu) / G(2-mu); at mu = 1/2, x = 1 that is 2/sqrt(pi)
    ramp = PiecewiseLinearTrace(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 0.0]))
    err = abs(float(rl_left_pwl(ramp, 0.5, 1.0)) - 1.0 / gamma(1.5))
    yield CheckResult("fracops", "ramp-gamma(1.5)", err <= 1e-14, err, 1e-14)


def check_riesz(quad=None):
    xs = (0.25, 0.5, 0.75)
    for alpha in (1.1, 1.3, 1.5, 1.9):
        bub = lambda t: t * (1.0 - t)
        worst = max(abs(riesz_bubble(x, alpha) - grunwald_riesz_richardson(bub, alpha, x, 0.0, 1.0, 2000))
                    / abs(riesz_bubble(x, alpha)) for x in xs)
        yield CheckResult("riesz", f"bubble-vs-grunwald[alpha={alpha}]", worst <= 1e-3, worst, 1e-3)
    err = abs(float(riesz_bubble(0.5, 1.999)) - 2.0) / 2.0
    yield CheckResult("riesz", "alpha-to-2-limit", err <= 0.02, err, 0.02)


def check_stiffness(quad=None, tol: float = 1e-4):
    for nx in (2, 3):
        mesh = build_structured_mesh(Domain(), nx, nx)
        nodes = mesh.interior_nodes
        for alpha in (1.1, 1.5, 1.9):
            A = assemble_stiffness(mesh, alpha)
            worst = 0.0
            try:
                for a in range(len(nodes)):
                    for b in range(a, len(nodes)):
                        ref = oracle_stiffness_entry(mesh, nodes[a], nodes[b], alpha)
                        worst = max(worst, abs(A[a, b] - ref) / abs(ref))
            except OracleFailure:
                worst = np.inf
            yield CheckResult("stiffness", f"entries-vs-oracle[nx={nx},alpha={alpha}]", worst <= tol, worst, tol)


def check_laplace(quad=None):
    mesh = build_structured_mesh(Domain(), 4, 4)
    A = assemble_stiffness(mesh, 1.999)
    K = laplacian_stiffness(mesh)
    err = np.abs(A - K).max() / np.abs(K).max()
    yield CheckResult("laplace", "alpha=1.999-vs-P1-laplacian[nx=4]", err <= 0.05, err, 0.05)


def check_spd(quad=None):
    for alpha in (1.1, 1.3, 1.5, 1.7, 1.9):
        for nx in (2, 4, 8):
            mesh = build_structured_mesh(Domain(), nx, nx)
            A = assemble_stiffness(mesh, alpha)
            asym = np.abs(A - A.T).max() / np.abs(A).max()
            lam_min = float(np.linalg.eigvalsh(A).min())
            ok = asym <= 1e-10 and lam_min > 0.0
            yield CheckResult("spd", f"symmetric-positive[alpha={alpha},nx={nx}]", ok, lam_min, 0.0)


def check_quadrature(quad=None, nx: int = 10, alpha: float = 1.3, tol: float = 0.005):
    quad = quad or QuadratureSpec()
    case = ManufacturedCase(alpha)
    base = solve_case(case, nx, quad)
    fine_quad = quad.refined(2)
    fine = solve_case(case, nx, fine_quad)
    # the stiffness is integrated in closed form, so it must not move at all
    dA = np.abs(base.stiffness - fine.stiffness).max() / np.abs(fine.stiffness).max()
    yield CheckResult("quadrature", "stiffness-under-doubling", dA <= 1e-6, dA, 1e-6)
    for key in ("err_q_L2", "err_p_eng", "err_u_eng"):
        change = abs(base.errors[key] - fine.errors[key]) / abs(fine.errors[key])
        yield CheckResult("quadrature", f"{key}-under-doubling[nx={nx}]", change <= tol, change, tol)


def check_kkt(quad=None, nx: int = 8, alpha: float = 1.5):
    quad = quad or QuadratureSpec()
    case = ManufacturedCase(alpha)
    res = solve_case(case, nx, quad)
    sol = res.solution
    q = sol.q_h_at_quadrature(quad)
    p = sol.p_h.at_quadrature(quad)
    infeas = max(0.0, float(np.max(case.v1 - q)), float(np.max(q - case.v2)))
    yield CheckResult("kkt", "box-feasibility", infeas == 0.0, infeas, 0.0)
    grad = case.gamma * q + p
    lower, upper = q == case.v1, q == case.v2
    inner = ~(lower | upper)
    viol = max(
        float(np.max(np.abs(grad[inner]), initial=0.0)),
        float(np.max(-grad[lower], initial=0.0)),
        float(np.max(grad[upper], initial=0.0)),
    )
    yield CheckResult("kkt", "pointwise-conditions", viol <= 1e-10, viol, 1e-10)
    yield CheckResult("kkt", "final-update-norm", sol.final_update_norm <= 1e-12, sol.final_update_norm, 1e-12)
    tq = triangle_quadrature(res.mesh, quad)
    starts = [solve_case(case, nx, quad, initial_control=lambda x, y, v=v: np.full_like(x, v))
              for v in (case.v1, case.v2)]
    qa, qb = (r.solution.q_h_at_quadrature(quad) for r in starts)
    diff = float(np.sqrt(tq.integrate((qa - qb) ** 2)))
    yield CheckResult("kkt", "initial-control-independence", diff <= 1e-9, diff, 1e-9)


def check_adjoint(quad=None, nx: int = 10, alpha: float = 1.3, pairs: int = 20, seed: int = 11):
    mesh = build_structured_mesh(Domain(), nx, nx)
    A = SPDSolver(assemble_stiffness(mesh, alpha))
    M = assemble_mass(mesh)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        r, s = rng.standard_normal((2, mesh.n_dofs))
        Mr, Ms = M @ r, M @ s
        lhs, rhs = A.solve(Mr) @ Ms, Mr @ A.solve(Ms)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    yield CheckResult("adjoint", f"symmetry[{pairs} pairs,nx={nx}]", worst <= 1e-10, worst, 1e-10)


CHECKS = {
    "fracops": check_fracops,
    "riesz": check_riesz,
    "stiffness": check_stiffness,
    "laplace": check_laplace,
    "spd": check_spd,
    "quadrature": check_quadrature,
    "kkt": check_kkt,
    "adjoint": check_adjoint,
}


def run_verify(quad: QuadratureSpec | None = None, only=None, report=print) -> list[CheckResult]:
    """Run the selected families (all by default), reporting one line per check."""
    only = list(only or FAMILIES)
    unknown = [f for f in only if f not in CHECKS]
    if unknown:
        raise ValueError(f"unknown check families {unknown}; choose from {list(FAMILIES)}")
    results = []
    for fam in only:
        for res in CHECKS[fam](quad):
            results.append(res)
            if report is not None:
                report(res.line())
    return results

