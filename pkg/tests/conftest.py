import functools

import pytest

from fracocp.assembly import QuadratureSpec
from fracocp.manufactured import ManufacturedCase
from fracocp.mesh import Domain, build_structured_mesh
from fracocp.study import solve_case


@functools.lru_cache(maxsize=None)
def example_result(alpha, nx, n_transverse=4, n_axial=6):
    """Solved Example-1 instance, shared across test modules."""
    return solve_case(ManufacturedCase(alpha), nx, QuadratureSpec(n_transverse, n_axial))


@pytest.fixture
def unit():
    return Domain(0.0, 1.0, 0.0, 1.0)


@pytest.fixture
def mesh2(unit):
    return build_structured_mesh(unit, 2, 2)


@pytest.fixture
def mesh4(unit):
    return build_structured_mesh(unit, 4, 4)
