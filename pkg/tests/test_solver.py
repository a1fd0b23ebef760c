import numpy as np
import pytest

from fracocp.assembly import QuadratureSpec, assemble_mass, assemble_stiffness
from fracocp.manufactured import ManufacturedCase
from fracocp.mesh import build_structured_mesh
from fracocp.norms import convergence_order, energy_error
from fracocp.solver import DiscreteField, NotSPDError, ResidualError, SPDSolver, solve_adjoint, solve_spd, solve_state

Q = QuadratureSpec()


def test_scaled_identity():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(solve_spd(4.0 * np.eye(3), b), b / 4.0, rtol=1e-15)


def test_random_spd():
    rng = np.random.default_rng(3)
    G = rng.standard_normal((5, 5))
    A = G.T @ G + np.eye(5)
    x = rng.standard_normal(5)
    np.testing.assert_allclose(solve_spd(A, A @ x), x, rtol=1e-10, atol=1e-12)


def test_indefinite_rejected():
    with pytest.raises(NotSPDError):
        SPDSolver(np.diag([1.0, -1.0]))


def test_residual_guard_trips_on_tampered_factor():
    s = SPDSolver(np.diag([2.0, 3.0]))
    s.A = np.diag([2.0, 30.0])  # factor no longer matches the matrix
    with pytest.raises(ResidualError):
        s.solve(np.array([1.0, 1.0]))


def test_state_residual_example(unit):
    case = ManufacturedCase(1.3)
    m = build_structured_mesh(unit, 10, 10)
    A = assemble_stiffness(m, case.order)
    u = solve_state(A, None, m, case.source_g, case.exact_q, Q)
    from fracocp.assembly import assemble_load
    b = assemble_load(m, lambda x, y: case.source_g(x, y) + case.exact_q(x, y), Q)
    assert np.abs(A @ u.coeffs - b).max() <= 1e-10 * np.abs(b).max()


def test_zero_load_and_linearity(mesh4):
    A = assemble_stiffness(mesh4, 1.5)
    g = lambda x, y: np.sin(3 * x) * y
    q = lambda x, y: -np.sin(3 * x) * y
    assert np.all(solve_state(A, None, mesh4, g, q, Q).coeffs == 0.0)
    solver = SPDSolver(A)
    u1 = solve_state(solver, None, mesh4, g, lambda x, y: 0.0 * x, Q)
    u2 = solve_state(solver, None, mesh4, lambda x, y: 2 * g(x, y), lambda x, y: 0.0 * x, Q)
    np.testing.assert_array_equal(u2.coeffs, 2.0 * u1.coeffs)


def test_adjoint_of_matching_state_is_zero(mesh4):
    A = assemble_stiffness(mesh4, 1.5)
    u = DiscreteField(mesh4, np.linspace(0.1, 1.0, mesh4.n_dofs))
    p = solve_adjoint(A, None, mesh4, u, u, Q)
    assert np.abs(p.coeffs).max() <= 1e-14


def test_adjoint_identity(unit):
    m = build_structured_mesh(unit, 10, 10)
    A = SPDSolver(assemble_stiffness(m, 1.3))
    M = assemble_mass(m)
    rng = np.random.default_rng(0)
    for _ in range(20):
        r, s = rng.standard_normal((2, m.n_dofs))
        lhs, rhs = A.solve(M @ r) @ (M @ s), (M @ r) @ A.solve(M @ s)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_determinism(mesh4):
    A = assemble_stiffness(mesh4, 1.7)
    g = lambda x, y: x * y
    a = solve_state(A, None, mesh4, g, 0.0, Q).coeffs
    b = solve_state(A, None, mesh4, g, 0.0, Q).coeffs
    assert a.tobytes() == b.tobytes()


def test_discrete_field(mesh4):
    with pytest.raises(ValueError):
        DiscreteField(mesh4, np.zeros(3))
    f = DiscreteField(mesh4, np.ones(mesh4.n_dofs))
    assert np.all(f(np.array([0.0, 1.0, 0.3]), np.array([0.4, 0.2, 0.0])) == 0.0)
    assert f(0.5, 0.5) == 1.0


def _state_and_adjoint_errors(alpha, nxs):
    case = ManufacturedCase(alpha)
    eu, ep = [], []
    for n in nxs:
        m = build_structured_mesh(case.domain, n, n)
        A = SPDSolver(assemble_stiffness(m, case.order))
        u_h = solve_state(A, None, m, case.source_g, case.exact_q, Q)
        eu.append(energy_error(m, u_h, case.u, case.order, quad=Q))
        # adjoint driven by the exact state: right-hand side exact_u - u_d
        p_h = solve_adjoint(A, None, m, DiscreteField(m, np.zeros(m.n_dofs)),
                            lambda x, y: case.desired_state_ud(x, y) - case.exact_u(x, y), Q)
        ep.append(energy_error(m, p_h, case.p, case.order, quad=Q))
    return eu, ep


def test_state_and_adjoint_rates():
    nxs = (5, 10, 20)
    eu, ep = _state_and_adjoint_errors(1.3, nxs)
    for errs in (eu, ep):
        assert errs[0] > errs[1] > errs[2]
        for k in range(2):
            assert convergence_order(errs[k], errs[k + 1], 1 / nxs[k], 1 / nxs[k + 1]) >= 0.8
