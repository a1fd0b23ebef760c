import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracocp.mesh import Domain, PiecewiseLinearTrace, build_structured_mesh, trace_along_x, trace_along_y
from fracocp.oracles import barycentric_hat


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Domain(0.0, 1.0, 2.0, 2.0)


def test_smallest_mesh(unit):
    m = build_structured_mesh(unit, 1, 1)
    assert (m.n_nodes, len(m.triangles), m.n_dofs) == (4, 2, 0)


def test_two_by_two(mesh2):
    assert (mesh2.n_nodes, len(mesh2.triangles), mesh2.n_dofs) == (9, 8, 1)
    np.testing.assert_array_equal(mesh2.nodes[mesh2.interior_nodes[0]], [0.5, 0.5])


def test_h_leg_matches_first_table_row(unit):
    m = build_structured_mesh(unit, 10, 10)
    assert m.h_leg == pytest.approx(0.1)
    assert m.h_diam == pytest.approx(np.sqrt(2) / 10)


@pytest.mark.parametrize("nx,ny", [(1, 1), (3, 5), (7, 2)])
def test_counts_orientation_and_area(nx, ny):
    dom = Domain(-1.0, 2.0, 0.5, 1.5)
    m = build_structured_mesh(dom, nx, ny)
    assert m.n_nodes == (nx + 1) * (ny + 1)
    assert len(m.triangles) == 2 * nx * ny
    assert np.all(m.areas > 0)  # counterclockwise
    assert m.areas.sum() == pytest.approx(dom.area, rel=1e-12)


def test_interior_nodes_strictly_inside(unit):
    m = build_structured_mesh(unit, 5, 4)
    p = m.nodes[m.interior_nodes]
    assert np.all((p > 0) & (p < 1))
    assert m.n_dofs == 4 * 3


def test_bad_sizes(unit):
    with pytest.raises(ValueError):
        build_structured_mesh(unit, 0, 3)
    with pytest.raises(ValueError):
        build_structured_mesh(unit, 2.5, 3)


def test_trace_through_own_row_is_1d_hat(mesh2):
    node = mesh2.interior_nodes[0]
    for tr in (trace_along_x(mesh2, node, 0.5 - 1e-15), trace_along_y(mesh2, node, 0.5 + 1e-15)):
        assert tr(0.5) == pytest.approx(1.0, abs=1e-12)
        assert tr(0.0) == 0.0 and tr(1.0) == 0.0
        assert tr(0.25) == pytest.approx(0.5, abs=1e-12)


def test_quarter_line_peak_half(mesh2):
    node = mesh2.interior_nodes[0]
    tx = trace_along_x(mesh2, node, 0.25)
    ty = trace_along_y(mesh2, node, 0.75)
    assert tx.values.max() == pytest.approx(0.5, abs=1e-14)
    assert ty.values.max() == pytest.approx(0.5, abs=1e-14)
    xs = np.linspace(0, 1, 100)
    ref = [barycentric_hat(mesh2, node, x, 0.25) for x in xs]
    np.testing.assert_allclose(tx(xs), ref, atol=1e-13)


def test_trace_outside_support_is_empty(mesh4):
    node = mesh4.interior_nodes[0]  # grid (1, 1), support y in (0, 0.5)
    assert trace_along_x(mesh4, node, 0.8).is_empty
    assert trace_along_y(mesh4, node, 0.9).is_empty


def test_trace_rejects_boundary_node(mesh4):
    with pytest.raises(ValueError):
        trace_along_x(mesh4, 0, 0.3)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.data())
def test_trace_matches_barycentric(n, x, y, data):
    m = build_structured_mesh(Domain(), n, n)
    node = int(data.draw(st.sampled_from(list(m.interior_nodes))))
    ref = barycentric_hat(m, node, x, y)
    assert float(trace_along_x(m, node, y)(x)) == pytest.approx(ref, abs=1e-12)
    assert float(trace_along_y(m, node, x)(y)) == pytest.approx(ref, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_partition_of_unity(n, x, y):
    m = build_structured_mesh(Domain(), n, n)
    total = sum(m.basis_values(k, x, y) for k in range(m.n_nodes))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_pwl_trace_validation_and_ops():
    with pytest.raises(ValueError):
        PiecewiseLinearTrace(np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]))
    a = PiecewiseLinearTrace(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0, 0.0]))
    b = PiecewiseLinearTrace(np.array([0.25, 0.6, 0.75]), np.array([0.0, 2.0, 0.0]))
    s = a + b
    xs = np.linspace(0, 1, 33)
    np.testing.assert_allclose(s(xs), a(xs) + b(xs), atol=1e-15)
    np.testing.assert_allclose(a.slope_jumps, [2.0, -4.0, 2.0])
    m = b.mirror(0.0, 1.0)
    np.testing.assert_allclose(m(1.0 - xs), b(xs), atol=1e-15)
