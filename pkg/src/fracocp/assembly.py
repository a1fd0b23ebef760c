"""Fractional stiffness, mass and load assembly for P1 elements on interior nodes.

The stiffness entries are integrated exactly. Along a line, the left and
right RL derivatives of a hat trace are sums of truncated powers
``d_k (x - t_k)_+^(1-mu)`` and ``d_k (t_k - x)_+^(1-mu)``, so the pairing of
two traces reduces to the Beta integral

    int (x - t_k)_+^b (t_l - x)_+^b dx = B(b + 1, b + 1) (t_l - t_k)_+^(2b + 1).

Inside a mesh strip the breakpoints move linearly with the transverse
coordinate and the slope jumps are constant, so the transverse integral is
elementary as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.special import gamma, roots_jacobi, roots_legendre

from fracocp.fracops import FracOrder, truncated_power
from fracocp.mesh import Mesh, trace_along_x, trace_along_y


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss point counts.

    ``n_transverse`` points per strip across the lines on which fractional
    derivatives are taken, ``n_axial`` points per breakpoint subinterval
    along them. Triangle integrals use the collapsed product of the two on
    each midpoint child of the triangle.
    """

    n_transverse: int = 4
    n_axial: int = 6

    def __post_init__(self):
        if self.n_transverse < 2 or self.n_axial < 2:
            raise ValueError("quadrature needs at least 2 points in each direction")

    def refined(self, factor: int = 2) -> QuadratureSpec:
        return QuadratureSpec(self.n_transverse * factor, self.n_axial * factor)


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0):
    x, w = roots_legendre(n)
    return a + (b - a) * 0.5 * (x + 1.0), 0.5 * (b - a) * w


_MIDPOINT_CHILDREN = np.array([
    [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]],
    [[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5]],
    [[0.5, 0.0, 0.5], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]],
    [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
])


@lru_cache(maxsize=None)
def _reference_triangle_rule(n_collapsed: int, n_along: int):
    """Collapsed Gauss product rule applied on the four midpoint children.

    The children halve the resolution length for integrands with kinks
    (the projected control) or boundary singularities (the source term).
    Returns barycentric coordinates and weights summing to 1.
    """
    # xi = u, eta = v (1 - u), Jacobian (1 - u) absorbed by Gauss-Jacobi(1, 0)
    t, wt = roots_jacobi(n_collapsed, 1.0, 0.0)
    u = 0.5 * (t + 1.0)
    wu = 0.25 * wt
    v, wv = gauss_legendre(n_along)
    U, V = np.meshgrid(u, v, indexing="ij")
    xi = U.ravel()
    eta = (V * (1.0 - U)).ravel()
    lam = np.column_stack((1.0 - xi - eta, xi, eta))
    w = 2.0 * np.outer(wu, wv).ravel()
    lam_all = np.vstack([lam @ child for child in _MIDPOINT_CHILDREN])
    return lam_all, np.tile(w / 4.0, 4)


class TriangleQuadrature:
    """Quadrature points and weights on every triangle of a mesh.

    Attributes
    ----------
    x, y : (n_triangles, n_points) arrays of physical coordinates.
    weights : (n_triangles, n_points) array; sums to the domain area.
    lam : (n_points, 3) barycentric coordinates of the reference points.
    """

    def __init__(self, mesh: Mesh, quad: QuadratureSpec):
        self.mesh = mesh
        self.quad = quad
        self.lam, wref = _reference_triangle_rule(quad.n_transverse, quad.n_axial)
        p = mesh.nodes[mesh.triangles]  # (T, 3, 2)
        pts = np.einsum("qk,tkd->tqd", self.lam, p)
        self.x = pts[..., 0]
        self.y = pts[..., 1]
        self.weights = mesh.areas[:, None] * wref[None, :]

    def integrate(self, values) -> float:
        return float(np.sum(self.weights * values))

    def evaluate(self, f):
        """Values of ``f`` at the quadrature points; ``f`` is callable or already sampled."""
        if callable(f):
            return np.asarray(f(self.x, self.y), dtype=float) * np.ones_like(self.x)
        f = np.asarray(f, dtype=float)
        if f.ndim == 0:
            return np.full_like(self.x, float(f))
        if f.shape != self.x.shape:
            raise ValueError(f"sampled field has shape {f.shape}, expected {self.x.shape}")
        return f

    def p1_values(self, full_coeffs: np.ndarray) -> np.ndarray:
        return full_coeffs[self.mesh.triangles] @ self.lam.T

    def load(self, values: np.ndarray) -> np.ndarray:
        """``int f phi_k`` for every node ``k`` (boundary included)."""
        contrib = (self.weights * values) @ self.lam  # (T, 3)
        return np.bincount(self.mesh.triangles.ravel(), weights=contrib.ravel(),
                           minlength=self.mesh.n_nodes)


@lru_cache(maxsize=32)
def triangle_quadrature(mesh: Mesh, quad: QuadratureSpec) -> TriangleQuadrature:
    return TriangleQuadrature(mesh, quad)


def _strip_pair_integrals(base, rate, h, expo):
    """``int_0^h (t_l(s) - t_k(s))_+^expo ds`` for all breakpoint pairs (k, l)."""
    d0 = base[None, :] - base[:, None]
    dq = rate[None, :] - rate[:, None]
    d1 = d0 + dq * h
    mid = d0 + 0.5 * dq * h
    d0 = np.maximum(d0, 0.0)
    d1 = np.maximum(d1, 0.0)
    out = np.zeros_like(d0)
    flat = (dq == 0.0) & (mid > 0)
    out[flat] = d0[flat] ** expo * h
    sl = (dq != 0.0) & (mid > 0)
    out[sl] = (d1[sl] ** (expo + 1) - d0[sl] ** (expo + 1)) / ((expo + 1) * dq[sl])
    return out


def directional_pairing(mesh: Mesh, axis: str, mu: float) -> np.ndarray:
    """Matrix ``S`` with ``S[i, j] = (L phi_j, R phi_i) + (R phi_j, L phi_i)`` along ``axis``.

    Rows and columns follow ``mesh.interior_nodes``.
    """
    n = mesh.n_dofs
    S = np.zeros((n, n))
    if n == 0:
        return S
    base, rate = mesh.strip_breakpoints(axis)
    if axis == "x":
        trans, h, tracer = mesh.ys, mesh.hy, trace_along_x
        grid_index = mesh.interior_nodes // (mesh.nx + 1)
    else:
        trans, h, tracer = mesh.xs, mesh.hx, trace_along_y
        grid_index = mesh.interior_nodes % (mesh.nx + 1)
    expo = 3.0 - 2.0 * mu
    G_scale = 1.0 / gamma(4.0 - 2.0 * mu)
    order = np.argsort(base + rate * 0.5 * h, kind="stable")

    for k in range(trans.size - 1):
        s_mid = trans[k] + 0.5 * h
        local = np.flatnonzero((grid_index == k) | (grid_index == k + 1))
        if local.size == 0:
            continue
        pos = (base + rate * 0.5 * h)[order]
        D = np.zeros((local.size, base.size))
        for r, dof in enumerate(local):
            tr = tracer(mesh, int(mesh.interior_nodes[dof]), s_mid)
            if tr.is_empty:
                continue
            idx = np.searchsorted(pos, tr.breakpoints)
            idx = np.clip(idx, 0, pos.size - 1)
            lo = np.clip(idx - 1, 0, pos.size - 1)
            idx = np.where(np.abs(pos[lo] - tr.breakpoints) < np.abs(pos[idx] - tr.breakpoints), lo, idx)
            if not np.allclose(pos[idx], tr.breakpoints, rtol=0, atol=1e-12 * h):
                raise RuntimeError("trace breakpoint does not match the strip breakpoints")
            D[r, order[idx]] = tr.slope_jumps
        G = G_scale * _strip_pair_integrals(base, rate, h, expo)
        P = D @ G @ D.T  # P[r1, r2] = int L phi_r1 * R phi_r2
        S[np.ix_(local, local)] += P + P.T
    return S


def assemble_stiffness(mesh: Mesh, order: FracOrder | float, kappa1: float = 1.0,
                       kappa2: float = 1.0, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Dense stiffness matrix ``A[i, j] = Lambda_h(phi_j, phi_i)`` over interior nodes.

    ``quad`` is accepted for interface symmetry with the load and norm
    routines; the stiffness integrals are evaluated in closed form.
    """
    if not isinstance(order, FracOrder):
        order = FracOrder(order)
    if mesh.n_dofs == 0:
        raise ValueError("mesh has no interior nodes")
    A = np.zeros((mesh.n_dofs, mesh.n_dofs))
    if kappa1 != 0.0:
        A += kappa1 * directional_pairing(mesh, "x", order.mu)
    if kappa2 != 0.0:
        A += kappa2 * directional_pairing(mesh, "y", order.mu)
    A *= order.riesz_factor
    return 0.5 * (A + A.T)


def assemble_mass(mesh: Mesh, full: bool = False) -> sp.csr_matrix:
    """Exact P1 mass matrix; interior nodes only unless ``full``."""
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    vals = (mesh.areas[:, None, None] * local[None]).ravel()
    M = sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    if full:
        return M
    idx = mesh.interior_nodes
    return M[idx][:, idx].tocsr()


def assemble_load(mesh: Mesh, f, quad: QuadratureSpec | None = None) -> np.ndarray:
    """``b_i = int f phi_i`` over interior nodes.

    ``f`` is a callable ``f(x, y)`` or its values at the triangle quadrature
    points of ``(mesh, quad)``.
    """
    tq = triangle_quadrature(mesh, quad or QuadratureSpec())
    return tq.load(tq.evaluate(f))[mesh.interior_nodes]


# ---------------------------------------------------------------------------
# verification oracle


class OracleFailure(RuntimeError):
    """An oracle integral did not reach its tolerance within the budget."""


@lru_cache(maxsize=None)
def _gl_pair(n):
    return roots_legendre(n)


def adaptive_gauss(f, a: float, b: float, tol: float, max_intervals: int = 4000):
    """Globally adaptive Gauss-Legendre quadrature of a vector-valued ``f``.

    ``f`` maps an array of ``n`` abscissae to an ``(n, m)`` array. Each
    interval is integrated with 10- and 21-point rules; the worst interval
    is bisected until the summed error estimate falls below ``tol``.
    """
    x10, w10 = _gl_pair(10)
    x21, w21 = _gl_pair(21)

    def rule(lo, hi):
        c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
        vals = f(np.concatenate((c + r * x10, c + r * x21)))
        lo_est = r * (w10 @ vals[:10])
        hi_est = r * (w21 @ vals[10:])
        return hi_est, float(np.max(np.abs(hi_est - lo_est)))

    intervals = [(a, b, *rule(a, b))]
    while True:
        err = sum(iv[3] for iv in intervals)
        if err <= tol:
            return sum(iv[2] for iv in intervals), err
        if len(intervals) >= max_intervals:
            raise OracleFailure(f"adaptive quadrature budget exhausted (error {err:.3e} > {tol:.3e})")
        worst = max(range(len(intervals)), key=lambda i: intervals[i][3])
        lo, hi, _, _ = intervals.pop(worst)
        mid = 0.5 * (lo + hi)
        intervals.append((lo, mid, *rule(lo, mid)))
        intervals.append((mid, hi, *rule(mid, hi)))


def _line_pieces(mesh: Mesh, axis: str, s: float, nodes):
    """Breakpoints and per-piece slopes of the traces of ``nodes`` on a line.

    Breakpoints come from intersecting the line with every triangle edge and
    values from barycentric coordinates computed from the vertex positions,
    independently of the structured trace extraction.
    """
    a_col, t_col = (0, 1) if axis == "x" else (1, 0)
    P = mesh.nodes
    edges = np.concatenate([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]]])
    p, q = P[edges[:, 0]], P[edges[:, 1]]
    sp_, sq = p[:, t_col], q[:, t_col]
    hit = (np.minimum(sp_, sq) <= s) & (np.maximum(sp_, sq) >= s) & (sp_ != sq)
    lam = (s - sp_[hit]) / (sq[hit] - sp_[hit])
    cross = p[hit, a_col] + lam * (q[hit, a_col] - p[hit, a_col])
    lo, hi = mesh.domain.interval(axis)
    t = np.unique(np.round(np.concatenate((cross, [lo, hi])), 14))
    pts = np.zeros((t.size, 2))
    pts[:, a_col] = t
    pts[:, t_col] = s
    vals = np.array([_barycentric_hat(mesh, node, pts) for node in nodes])
    slopes = np.diff(vals, axis=1) / np.diff(t)
    return t, slopes


def _barycentric_hat(mesh: Mesh, node: int, pts: np.ndarray) -> np.ndarray:
    out = np.zeros(len(pts))
    P = mesh.nodes
    for tri in mesh.triangles:
        if node not in tri:
            continue
        T = np.column_stack((P[tri[1]] - P[tri[0]], P[tri[2]] - P[tri[0]]))
        lam12 = np.linalg.solve(T, (pts - P[tri[0]]).T).T
        lam = np.column_stack((1.0 - lam12.sum(axis=1), lam12))
        inside = np.all(lam >= -1e-12, axis=1)
        k = int(np.flatnonzero(tri == node)[0])
        out[inside] = np.clip(lam[inside, k], 0.0, None)
    return out


def _kernel_integral(t0, t1, x, mu):
    """``int_{t0}^{t1} |x - w|^(-mu) dw`` restricted to ``w`` on one side of ``x``."""
    return (truncated_power(x - t0, 1.0 - mu) - truncated_power(x - t1, 1.0 - mu)) / (1.0 - mu)


def oracle_stiffness_entry(mesh: Mesh, i: int, j: int, order: FracOrder | float,
                           kappa1: float = 1.0, kappa2: float = 1.0, tol: float = 1e-6) -> float:
    """``Lambda_h(phi_j, phi_i)`` for node indices ``i, j`` by adaptive quadrature.

    Fractional derivatives of the hats are evaluated as convolutions of the
    singular kernel against the piecewise-constant slopes; the integrals
    along and across the lines are adaptive. Meant for tiny meshes.
    """
    if not isinstance(order, FracOrder):
        order = FracOrder(order)
    if mesh.n_dofs > 25:
        raise ValueError("oracle is restricted to meshes with at most 25 interior nodes")
    for node in (i, j):
        if not mesh.is_interior(node):
            raise ValueError(f"node {node} is not interior")
    mu = order.mu
    c = 1.0 / gamma(1.0 - mu)
    total = 0.0
    for axis, kappa in (("x", kappa1), ("y", kappa2)):
        if kappa == 0.0:
            continue
        trans = mesh.ys if axis == "x" else mesh.xs

        def along_line(s):
            t, slopes = _line_pieces(mesh, axis, s, (i, j))

            def integrand(x):
                xx = x[:, None]
                left = c * (slopes @ _kernel_integral(t[:-1], t[1:], xx, mu).T)
                right = -c * (slopes @ _kernel_integral(-t[1:], -t[:-1], -xx, mu).T)
                # left[m], right[m] for m = i, j
                return (left[1] * right[0] + right[1] * left[0])[:, None]

            acc = 0.0
            for lo, hi in zip(t[:-1], t[1:]):
                if hi - lo < 1e-12:
                    continue  # near-coincident crossings; the integrand is bounded
                # sigmoidal change of variables flattens the (x - t)^(1 - mu) endpoint behaviour
                def mapped(u, lo=lo, hi=hi):
                    um, vm = u**3, (1.0 - u) ** 3
                    w = um / (um + vm)
                    dw = 3.0 * (u * (1.0 - u)) ** 2 / (um + vm) ** 2
                    return integrand(lo + (hi - lo) * w) * ((hi - lo) * dw)[:, None]

                acc += adaptive_gauss(mapped, 0.0, 1.0, tol * 1e-2 * (hi - lo))[0][0]
            return acc

        def across(svals):
            return np.array([[along_line(s)] for s in svals])

        for lo, hi in zip(trans[:-1], trans[1:]):
            val, _ = adaptive_gauss(across, lo, hi, tol * 0.1 * (hi - lo))
            total += kappa * val[0]
    return order.riesz_factor * total
