"""L2 and fractional energy-norm errors, nodal interpolation, observed orders."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from fracocp.assembly import QuadratureSpec, gauss_legendre, triangle_quadrature
from fracocp.fracops import FracOrder, rl_left_pwl, rl_right_pwl
from fracocp.mesh import Mesh
from fracocp.solver import DiscreteField


def _values(tq, f, quad):
    if isinstance(f, DiscreteField):
        return f.at_quadrature(quad)
    return tq.evaluate(f)


def l2_error(mesh: Mesh, field_h, exact, quad: QuadratureSpec | None = None) -> float:
    """``||field_h - exact||_{L2}``; either argument may be a callable or a DiscreteField."""
    quad = quad or QuadratureSpec()
    tq = triangle_quadrature(mesh, quad)
    diff = _values(tq, field_h, quad) - _values(tq, exact, quad)
    return math.sqrt(tq.integrate(diff**2))


def interpolate_nodal(mesh: Mesh, exact) -> DiscreteField:
    """Nodal interpolant with the boundary values set to zero."""
    pts = mesh.nodes[mesh.interior_nodes]
    return DiscreteField(mesh, np.asarray(exact(pts[:, 0], pts[:, 1]), dtype=float))


@lru_cache(maxsize=None)
def graded_gauss(n: int, levels: int = 2, ratio: float = 0.2):
    """Gauss-Legendre on ``[0, 1]`` split geometrically toward both ends.

    Integrands along a line behave like ``(x - t)^(1 - mu)`` at every
    breakpoint ``t``; grading restores fast convergence there.
    """
    ends = [ratio**k for k in range(levels, 0, -1)]
    edges = [0.0, *ends, *(1.0 - e for e in reversed(ends)), 1.0]
    parts = [gauss_legendre(n, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _line_points(trace_bps, quad):
    x, w = graded_gauss(quad.n_axial)
    lo, hi = trace_bps[:-1, None], trace_bps[1:, None]
    return (lo + (hi - lo) * x).ravel(), ((hi - lo) * w).ravel()


def fractional_seminorm_sq(mesh: Mesh, exact, field_h: DiscreteField, order: FracOrder,
                           kappa1: float, kappa2: float, quad: QuadratureSpec) -> float:
    """``Lambda(e, e)`` for ``e = exact - field_h`` by line-wise quadrature."""
    mu = order.mu
    discrete_exact = isinstance(exact, DiscreteField)
    if discrete_exact:
        err = DiscreteField(mesh, exact.coeffs - field_h.coeffs)
    total = 0.0
    for axis, kappa in (("x", kappa1), ("y", kappa2)):
        if kappa == 0.0:
            continue
        trans = mesh.ys if axis == "x" else mesh.xs
        acc = 0.0
        for lo, hi in zip(trans[:-1], trans[1:]):
            svals, swts = gauss_legendre(quad.n_transverse, lo, hi)
            for s, ws in zip(svals, swts):
                if discrete_exact:
                    tr = err.trace(axis, s)
                    X, W = _line_points(tr.breakpoints, quad)
                    left = rl_left_pwl(tr, mu, X)
                    right = rl_right_pwl(tr, mu, X)
                else:
                    tr = field_h.trace(axis, s)
                    X, W = _line_points(tr.breakpoints, quad)
                    S = np.full_like(X, s)
                    xy = (X, S) if axis == "x" else (S, X)
                    left = exact.rl_left(axis, mu, *xy) - rl_left_pwl(tr, mu, X)
                    right = exact.rl_right(axis, mu, *xy) - rl_right_pwl(tr, mu, X)
                acc += ws * float(np.dot(W, left * right))
        total += kappa * 2.0 * acc
    return order.riesz_factor * total


def energy_error(mesh: Mesh, field_h: DiscreteField, exact, order: FracOrder | float,
                 kappa1: float = 1.0, kappa2: float = 1.0,
                 quad: QuadratureSpec | None = None) -> float:
    """``(||e||_{L2}^2 + |Lambda(e, e)|)^(1/2)`` for ``e = exact - field_h``.

    ``exact`` must expose ``rl_left(axis, mu, x, y)`` and
    ``rl_right(axis, mu, x, y)`` (e.g. a SeparableBubble) or be a
    DiscreteField on the same mesh.
    """
    if not isinstance(order, FracOrder):
        order = FracOrder(order)
    quad = quad or QuadratureSpec()
    if not isinstance(exact, DiscreteField) and not (hasattr(exact, "rl_left") and hasattr(exact, "rl_right")):
        raise ValueError("exact field must provide closed-form fractional derivatives (rl_left/rl_right)")
    l2 = l2_error(mesh, field_h, exact, quad)
    semi = fractional_seminorm_sq(mesh, exact, field_h, order, kappa1, kappa2, quad)
    return math.sqrt(l2**2 + abs(semi))


def discrete_energy_norm(A: np.ndarray, M, coeffs: np.ndarray) -> float:
    """``(c^T M c + c^T A c)^(1/2)``; the surrogate ``||Pi_h u - u_h||`` when ``c`` is a coefficient difference."""
    c = np.asarray(coeffs, dtype=float)
    return math.sqrt(float(c @ (M @ c)) + abs(float(c @ (A @ c))))


def convergence_order(e1: float, e2: float, h1: float, h2: float) -> float:
    """``log2(e1 / e2) / log2(h1 / h2)``."""
    if min(e1, e2, h1, h2) <= 0:
        raise ValueError("errors and mesh sizes must be positive")
    if h1 == h2:
        raise ValueError("mesh sizes must differ")
    return math.log2(e1 / e2) / math.log2(h1 / h2)


CSV_HEADER = ("h", "err_q_L2", "order_q", "err_p_eng", "order_p", "err_u_eng", "order_u")


@dataclass
class ConvergenceReport:
    """Errors per mesh and observed orders between consecutive meshes."""

    h: list = field(default_factory=list)
    err_q: list = field(default_factory=list)
    err_p: list = field(default_factory=list)
    err_u: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, h: float, err_q: float, err_p: float, err_u: float) -> None:
        self.h.append(h)
        self.err_q.append(err_q)
        self.err_p.append(err_p)
        self.err_u.append(err_u)

    def orders(self, errors) -> list:
        out = [None]
        for k in range(1, len(errors)):
            out.append(convergence_order(errors[k - 1], errors[k], self.h[k - 1], self.h[k]))
        return out

    @property
    def order_q(self):
        return self.orders(self.err_q)

    @property
    def order_p(self):
        return self.orders(self.err_p)

    @property
    def order_u(self):
        return self.orders(self.err_u)

    def rows(self):
        return list(zip(self.h, self.err_q, self.order_q, self.err_p, self.order_p, self.err_u, self.order_u))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for row in self.rows():
                w.writerow(["" if v is None else f"{v:.17e}" for v in row])

    def write_loglog(self, directory, tag: str = "") -> list[Path]:
        """One ``h,err`` file per variable for log-log plots."""
        directory = Path(directory)
        paths = []
        for name, errs in (("q", self.err_q), ("p", self.err_p), ("u", self.err_u)):
            path = directory / f"loglog_{name}{tag}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(("h", "err"))
                for h, e in zip(self.h, errs):
                    w.writerow((f"{h:.17e}", f"{e:.17e}"))
            paths.append(path)
        return paths

    def format_table(self) -> str:
        def fmt_order(o):
            return "-" if o is None else f"{o:.2f}"

        lines = [f"{'h':>10} {'||q-q_h||_L2':>13} {'order':>6} {'||p-p_h||_eng':>14} {'order':>6} "
                 f"{'||u-u_h||_eng':>14} {'order':>6}"]
        for h, eq, oq, ep, op, eu, ou in self.rows():
            lines.append(f"{h:10.6f} {eq:13.4e} {fmt_order(oq):>6} {ep:14.4e} {fmt_order(op):>6} "
                         f"{eu:14.4e} {fmt_order(ou):>6}")
        return "\n".join(lines)

    @classmethod
    def from_csv(cls, path) -> ConvergenceReport:
        rep = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                rep.add(float(row["h"]), float(row["err_q_L2"]), float(row["err_p_eng"]), float(row["err_u_eng"]))
        return rep
