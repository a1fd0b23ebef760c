"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line."""

import numpy as np
import pytest

from conftest import example_result
from fracocp.assembly import QuadratureSpec, assemble_stiffness
from fracocp.manufactured import ManufacturedCase
from fracocp.mesh import build_structured_mesh
from fracocp.norms import convergence_order, energy_error
from fracocp.solver import solve_state
from fracocp.verify import check_adjoint, check_fracops, check_kkt, check_laplace, check_spd, check_stiffness

# published reference errors for alpha = 1.3 at h = 1/10, 1/15, 1/20
TABLE_Q = (1.4265e-02, 8.4741e-03, 5.8169e-03)
TABLE_P = (4.0697e-02, 2.6194e-02, 1.9352e-02)
TABLE_U = (5.8055e-02, 3.9514e-02, 3.0027e-02)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def _orders(errs, hs):
    return [convergence_order(errs[k], errs[k + 1], hs[k], hs[k + 1]) for k in range(len(errs) - 1)]


def test_criterion_1_table_orders_and_magnitudes(report):
    nxs = (10, 15, 20)
    hs = [1 / n for n in nxs]
    res = [example_result(1.3, n) for n in nxs]
    eq = [r.errors["err_q_L2"] for r in res]
    ep = [r.errors["err_p_eng"] for r in res]
    eu = [r.errors["err_u_eng"] for r in res]
    oq, op, ou = _orders(eq, hs), _orders(ep, hs), _orders(eu, hs)
    bands = all(1.0 <= o <= 1.6 for o in oq) and all(0.75 <= o <= 1.25 for o in ou) \
        and all(0.8 <= o <= 1.3 for o in op)
    ratios = [e / t for errs, table in ((eq, TABLE_Q), (ep, TABLE_P), (eu, TABLE_U)) for e, t in zip(errs, table)]
    magnitudes = all(1 / 3 <= r <= 3 for r in ratios)
    ok = bands and magnitudes
    detail = (f"order_q={[round(o, 3) for o in oq]} order_p={[round(o, 3) for o in op]} "
              f"order_u={[round(o, 3) for o in ou]}; error/table ratios "
              f"q={[round(r, 3) for r in ratios[0:3]]} p={[round(r, 3) for r in ratios[3:6]]} "
              f"u={[round(r, 3) for r in ratios[6:9]]}")
    report(1, ok, detail)
    assert bands, f"observed orders outside the bands: {detail}"
    assert magnitudes, f"error magnitudes outside a factor of 3: {detail}"


def test_criterion_2_error_series_decrease(report):
    nxs = (5, 10, 20)
    hs = [1 / n for n in nxs]
    worst, ok = np.inf, True
    parts = []
    for alpha in (1.1, 1.5, 1.9):
        res = [example_result(alpha, n) for n in nxs]
        for key in ("err_q_L2", "err_p_eng", "err_u_eng"):
            errs = [r.errors[key] for r in res]
            slopes = _orders(errs, hs)
            ok &= all(a > b for a, b in zip(errs, errs[1:])) and min(slopes) >= 0.75
            worst = min(worst, min(slopes))
            parts.append(f"{alpha}/{key[4]}:{min(slopes):.2f}")
    report(2, ok, f"min log-log slope {worst:.3f} (>= 0.75); " + " ".join(parts))
    assert ok


def test_criterion_3_state_equation_rate(report):
    case = ManufacturedCase(1.5)
    quad = QuadratureSpec()
    # known control q = 0: the source is the fractional operator applied to u
    g = lambda x, y: case.source_g(x, y) + case.exact_q(x, y)
    nxs = (5, 10, 20)
    errs = []
    for n in nxs:
        m = build_structured_mesh(case.domain, n, n)
        u_h = solve_state(assemble_stiffness(m, case.order), None, m, g, 0.0, quad)
        errs.append(energy_error(m, u_h, case.u, case.order, quad=quad))
    orders = _orders(errs, [1 / n for n in nxs])
    ok = min(orders) >= 0.8
    report(3, ok, f"energy errors {[f'{e:.4e}' for e in errs]}, orders {[round(o, 3) for o in orders]} (>= 0.8)")
    assert ok


def test_criterion_4_operator_oracles(report):
    results = list(check_fracops()) + list(check_stiffness())
    failed = [r.line() for r in results if not r.passed]
    pwl = results[0].value
    stiff = max(r.value for r in results if r.family == "stiffness")
    ok = not failed
    report(4, ok, f"pwl vs quadrature worst rel {pwl:.2e} (<= 1e-8); stiffness vs oracle worst rel {stiff:.2e} (<= 1e-4)")
    assert ok, failed


def test_criterion_5_structural_invariants(report):
    results = list(check_spd()) + list(check_laplace())
    failed = [r.line() for r in results if not r.passed]
    ok = not failed
    lap = results[-1].value
    report(5, ok, f"{len(results) - 1} (alpha, mesh) pairs symmetric and SPD; alpha=1.999 vs P1 Laplacian {lap:.2e} (<= 0.05)")
    assert ok, failed


def test_criterion_6_optimality_invariants(report):
    results = list(check_kkt(nx=10, alpha=1.3))
    failed = [r.line() for r in results if not r.passed]
    ok = not failed
    report(6, ok, "; ".join(f"{r.name} {r.value:.2e}" for r in results))
    assert ok, failed


def test_criterion_7_adjoint_symmetry(report):
    (res,) = check_adjoint(nx=10, pairs=20)
    report(7, res.passed, f"worst relative asymmetry {res.value:.2e} over 20 pairs (<= 1e-10)")
    assert res.passed
