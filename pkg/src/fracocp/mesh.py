"""Structured triangulations of a rectangle and 1D traces of P1 hat functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Domain:
    """The rectangle (a, b) x (c, d)."""

    a: float = 0.0
    b: float = 1.0
    c: float = 0.0
    d: float = 1.0

    def __post_init__(self):
        if not (self.a < self.b and self.c < self.d):
            raise ValueError(f"invalid domain ({self.a}, {self.b}) x ({self.c}, {self.d})")

    @property
    def area(self) -> float:
        return (self.b - self.a) * (self.d - self.c)

    def interval(self, axis: str) -> tuple[float, float]:
        return (self.a, self.b) if axis == "x" else (self.c, self.d)


@dataclass(frozen=True, eq=False)
class PiecewiseLinearTrace:
    """Continuous piecewise-linear function of one variable, zero outside
    ``[breakpoints[0], breakpoints[-1]]``.

    An empty trace (no breakpoints) is the zero function.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", v)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("breakpoints and values must be 1D arrays of equal length")
        if t.size == 1:
            raise ValueError("a non-empty trace needs at least two breakpoints")
        if t.size and np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("trace values must be finite")

    @classmethod
    def empty(cls) -> PiecewiseLinearTrace:
        return cls(np.empty(0), np.empty(0))

    @property
    def is_empty(self) -> bool:
        return self.breakpoints.size == 0

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    @property
    def slope_jumps(self) -> np.ndarray:
        """Change of slope at every breakpoint (slope is zero outside the support)."""
        if self.is_empty:
            return np.empty(0)
        s = np.concatenate(([0.0], self.slopes, [0.0]))
        return np.diff(s)

    def __call__(self, x):
        if self.is_empty:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.interp(x, self.breakpoints, self.values, left=0.0, right=0.0)

    def __add__(self, other: PiecewiseLinearTrace) -> PiecewiseLinearTrace:
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        t = np.union1d(self.breakpoints, other.breakpoints)
        return PiecewiseLinearTrace(t, self(t) + other(t))

    def mirror(self, lo: float, hi: float) -> PiecewiseLinearTrace:
        """Reflect about the midpoint of ``[lo, hi]``: t -> lo + hi - t."""
        if self.is_empty:
            return self
        return PiecewiseLinearTrace((lo + hi) - self.breakpoints[::-1], self.values[::-1])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform right-triangle mesh; every cell is cut along its SW-NE diagonal.

    Node ``k`` sits at grid position ``(k % (nx + 1), k // (nx + 1))``.
    Triangle ``2 * (j * nx + i)`` is the lower one of cell ``(i, j)``,
    ``2 * (j * nx + i) + 1`` the upper one.
    """

    domain: Domain
    nx: int
    ny: int
    nodes: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    interior_nodes: np.ndarray = field(repr=False)

    @property
    def hx(self) -> float:
        return (self.domain.b - self.domain.a) / self.nx

    @property
    def hy(self) -> float:
        return (self.domain.d - self.domain.c) / self.ny

    @property
    def h_leg(self) -> float:
        return self.hx

    @property
    def h_diam(self) -> float:
        return float(np.hypot(self.hx, self.hy))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_dofs(self) -> int:
        return self.interior_nodes.size

    @cached_property
    def xs(self) -> np.ndarray:
        return np.linspace(self.domain.a, self.domain.b, self.nx + 1)

    @cached_property
    def ys(self) -> np.ndarray:
        return np.linspace(self.domain.c, self.domain.d, self.ny + 1)

    @cached_property
    def dof_of_node(self) -> np.ndarray:
        """Map node index -> position in ``interior_nodes`` (-1 on the boundary)."""
        m = np.full(self.n_nodes, -1, dtype=np.intp)
        m[self.interior_nodes] = np.arange(self.n_dofs)
        return m

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def node_grid_index(self, node: int) -> tuple[int, int]:
        return node % (self.nx + 1), node // (self.nx + 1)

    def is_interior(self, node: int) -> bool:
        return bool(self.dof_of_node[node] >= 0)

    def locate(self, x, y):
        """Return ``(triangle, vertex_nodes, barycentric)`` for points ``(x, y)``.

        Points on shared edges are assigned to one of the neighbouring
        triangles; the P1 interpolant is continuous so the choice is harmless.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        dom = self.domain
        sx = (x - dom.a) / self.hx
        sy = (y - dom.c) / self.hy
        i = np.clip(np.floor(sx).astype(np.intp), 0, self.nx - 1)
        j = np.clip(np.floor(sy).astype(np.intp), 0, self.ny - 1)
        xi = sx - i
        eta = sy - j
        lower = xi >= eta
        tri = 2 * (j * self.nx + i) + (~lower)
        verts = self.triangles[tri]
        lam = np.empty(x.shape + (3,))
        # lower: (n00, n10, n11); upper: (n00, n11, n01)
        lam[..., 0] = np.where(lower, 1.0 - xi, 1.0 - eta)
        lam[..., 1] = np.where(lower, xi - eta, xi)
        lam[..., 2] = np.where(lower, eta, eta - xi)
        return tri, verts, lam

    def evaluate(self, full_coeffs: np.ndarray, x, y) -> np.ndarray:
        """Evaluate the P1 function with nodal values ``full_coeffs`` (all nodes)."""
        _, verts, lam = self.locate(x, y)
        return np.einsum("...k,...k->...", lam, full_coeffs[verts])

    def basis_values(self, node: int, x, y) -> np.ndarray:
        _, verts, lam = self.locate(x, y)
        return np.sum(np.where(verts == node, lam, 0.0), axis=-1)

    def strip_breakpoints(self, axis: str) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoints of P1 traces along lines inside one strip.

        For ``axis="x"`` the lines are horizontal and a strip is
        ``ys[j] < y < ys[j+1]``; the breakpoint positions are
        ``base + rate * (y - ys[j])``: first the vertical grid lines, then the
        crossings with the cell diagonals. ``axis="y"`` is the mirror image.
        """
        if axis == "x":
            grid, rate = self.xs, self.hx / self.hy
        elif axis == "y":
            grid, rate = self.ys, self.hy / self.hx
        else:
            raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
        base = np.concatenate((grid, grid[:-1]))
        slope = np.concatenate((np.zeros(grid.size), np.full(grid.size - 1, rate)))
        return base, slope

    def line_breakpoints(self, axis: str, s: float) -> np.ndarray:
        """Sorted breakpoints of P1 traces on the line at transverse coordinate ``s``."""
        trans = self.ys if axis == "x" else self.xs
        n = trans.size - 1
        strip = int(np.clip(np.searchsorted(trans, s, side="right") - 1, 0, n - 1))
        base, slope = self.strip_breakpoints(axis)
        return _unique_sorted(base + slope * (s - trans[strip]))

    def field_trace(self, full_coeffs: np.ndarray, axis: str, s: float) -> PiecewiseLinearTrace:
        """Restriction of a P1 function (zero on the boundary) to an axis-aligned line."""
        t = self.line_breakpoints(axis, s)
        if axis == "x":
            v = self.evaluate(full_coeffs, t, np.full_like(t, s))
        else:
            v = self.evaluate(full_coeffs, np.full_like(t, s), t)
        return PiecewiseLinearTrace(t, v)


def _unique_sorted(t: np.ndarray) -> np.ndarray:
    t = np.sort(t)
    scale = max(1.0, float(np.max(np.abs(t))))
    keep = np.concatenate(([True], np.diff(t) > 1e-13 * scale))
    return t[keep]


def build_structured_mesh(domain: Domain, nx: int, ny: int) -> Mesh:
    """Split ``domain`` into ``nx * ny`` cells and each cell into two triangles."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"nx and ny must be positive integers, got {nx}, {ny}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(domain.a, domain.b, nx + 1)
    ys = np.linspace(domain.c, domain.d, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack((X.ravel(), Y.ravel()))

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    n00 = (j * (nx + 1) + i).ravel()
    n10 = n00 + 1
    n01 = n00 + nx + 1
    n11 = n01 + 1
    triangles = np.empty((2 * nx * ny, 3), dtype=np.intp)
    triangles[0::2] = np.column_stack((n00, n10, n11))
    triangles[1::2] = np.column_stack((n00, n11, n01))

    gi, gj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    inside = (gi > 0) & (gi < nx) & (gj > 0) & (gj < ny)
    interior = np.flatnonzero(inside.ravel())
    return Mesh(domain, nx, ny, nodes, triangles, interior)


def _basis_trace(mesh: Mesh, node: int, axis: str, s: float) -> PiecewiseLinearTrace:
    if not (0 <= node < mesh.n_nodes) or not mesh.is_interior(node):
        raise ValueError(f"node {node} is not an interior node")
    lo, hi = mesh.domain.interval("y" if axis == "x" else "x")
    if not (lo < s < hi):
        raise ValueError(f"line coordinate {s} outside ({lo}, {hi})")
    gi, gj = mesh.node_grid_index(node)
    if axis == "x":
        own, h_t, k_t, k_a = mesh.ys, mesh.hy, gj, gi
        grid = mesh.xs
    else:
        own, h_t, k_t, k_a = mesh.xs, mesh.hx, gi, gj
        grid = mesh.ys
    # support spans the two strips adjacent to the node's own grid line
    if not (own[k_t - 1] < s < own[k_t + 1]):
        return PiecewiseLinearTrace.empty()
    t = mesh.line_breakpoints(axis, s)
    t = t[(t >= grid[k_a - 1] - 1e-13 * h_t) & (t <= grid[k_a + 1] + 1e-13 * h_t)]
    if axis == "x":
        v = mesh.basis_values(node, t, np.full_like(t, s))
    else:
        v = mesh.basis_values(node, np.full_like(t, s), t)
    nz = np.flatnonzero(np.abs(v) > 1e-15)
    if nz.size == 0:
        return PiecewiseLinearTrace.empty()
    first, last = max(nz[0] - 1, 0), min(nz[-1] + 1, t.size - 1)
    t, v = t[first:last + 1], v[first:last + 1].copy()
    v[0] = 0.0 if abs(v[0]) <= 1e-15 else v[0]
    v[-1] = 0.0 if abs(v[-1]) <= 1e-15 else v[-1]
    return PiecewiseLinearTrace(t, v)


def trace_along_x(mesh: Mesh, node_index: int, y: float) -> PiecewiseLinearTrace:
    """The function ``x -> phi_node(x, y)`` for an interior node."""
    return _basis_trace(mesh, node_index, "x", y)


def trace_along_y(mesh: Mesh, node_index: int, x: float) -> PiecewiseLinearTrace:
    """The function ``y -> phi_node(x, y)`` for an interior node."""
    return _basis_trace(mesh, node_index, "y", x)
