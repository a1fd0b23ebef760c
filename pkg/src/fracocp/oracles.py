"""Independent reference computations used by the test-suite and ``fracocp verify``."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import integrate
from scipy.special import binom, gamma

from fracocp.fracops import riesz_factor
from fracocp.mesh import Mesh, PiecewiseLinearTrace


def _quad(fun, lo, hi):
    # the integrand is bounded but only Holder at w = x; QUADPACK may warn while still meeting 1e-12
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fun, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)[0]


def marchaud_left(f, mu: float, x: float, a: float, breakpoints=()) -> float:
    """Left RL derivative in Marchaud form, by adaptive Gauss-Kronrod quadrature.

    ``D f(x) = f(x)(x-a)^-mu / G(1-mu) + mu/G(1-mu) int_a^x (f(x)-f(w)) / (x-w)^(1+mu) dw``
    """
    if x <= a:
        return 0.0
    fx = float(f(x))
    pts = sorted(p for p in breakpoints if a < p < x)
    edges = [a, *pts, x]
    acc = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        acc += _quad(lambda w: (fx - f(w)) / (x - w) ** (1.0 + mu), lo, hi)
    return (fx * (x - a) ** (-mu) + mu * acc) / gamma(1.0 - mu)


def marchaud_right(f, mu: float, x: float, b: float, breakpoints=()) -> float:
    if x >= b:
        return 0.0
    fx = float(f(x))
    pts = sorted(p for p in breakpoints if x < p < b)
    edges = [x, *pts, b]
    acc = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        acc += _quad(lambda w: (fx - f(w)) / (w - x) ** (1.0 + mu), lo, hi)
    return (fx * (b - x) ** (-mu) + mu * acc) / gamma(1.0 - mu)


def trace_function(trace: PiecewiseLinearTrace):
    return lambda w: float(trace(w))


def convolution_left(f, order: float, x: float, a: float) -> float:
    """``1/G(n-order) int_a^x (x-w)^(n-order-1) f(w) dw`` with ``n = ceil(order)``: the
    fractional integral that the RL derivative differentiates ``n`` times."""
    n = int(np.ceil(order))
    val, _ = integrate.quad(f, a, x, weight="alg", wvar=(0.0, n - order - 1.0), epsabs=1e-15, epsrel=1e-13)
    return val / gamma(n - order)


def grunwald_riesz(f, alpha: float, x: float, a: float, b: float, n: int) -> float:
    """Shifted Grunwald-Letnikov approximation (first order) of the Riesz derivative,
    normalised like :func:`fracocp.fracops.riesz_bubble`; ``x`` must be a grid node."""
    h = (b - a) / n
    i = int(round((x - a) / h))
    if not np.isclose(a + i * h, x):
        raise ValueError("x must be a grid node")
    grid = a + h * np.arange(n + 1)
    fv = f(grid)
    k = np.arange(n + 2)
    g = (-1.0) ** k * binom(alpha, k)
    left = sum(g[m] * fv[i - m + 1] for m in range(i + 2) if 0 <= i - m + 1 <= n)
    right = sum(g[m] * fv[i + m - 1] for m in range(n - i + 2) if 0 <= i + m - 1 <= n)
    return riesz_factor(alpha) * (left + right) / h**alpha


def grunwald_riesz_richardson(f, alpha: float, x: float, a: float, b: float, n: int) -> float:
    return 2.0 * grunwald_riesz(f, alpha, x, a, b, 2 * n) - grunwald_riesz(f, alpha, x, a, b, n)


def laplacian_stiffness(mesh: Mesh, kappa1: float = 1.0, kappa2: float = 1.0) -> np.ndarray:
    """Classical P1 stiffness ``kappa1 (u_x, v_x) + kappa2 (u_y, v_y)`` on interior nodes."""
    P = mesh.nodes
    K = np.zeros((mesh.n_nodes, mesh.n_nodes))
    for tri in mesh.triangles:
        X = np.column_stack((np.ones(3), P[tri]))
        grads = np.linalg.inv(X)[1:]  # rows: d/dx, d/dy of the three barycentrics
        area = 0.5 * abs(np.linalg.det(X))
        local = area * (kappa1 * np.outer(grads[0], grads[0]) + kappa2 * np.outer(grads[1], grads[1]))
        K[np.ix_(tri, tri)] += local
    idx = mesh.interior_nodes
    return K[np.ix_(idx, idx)]


def barycentric_hat(mesh: Mesh, node: int, x: float, y: float) -> float:
    """Hat function value by brute-force search over the triangles containing ``node``."""
    P = mesh.nodes
    for tri in mesh.triangles:
        if node not in tri:
            continue
        T = np.column_stack((P[tri[1]] - P[tri[0]], P[tri[2]] - P[tri[0]]))
        l12 = np.linalg.solve(T, np.array([x, y]) - P[tri[0]])
        lam = np.array([1.0 - l12.sum(), *l12])
        if np.all(lam >= -1e-13):
            return float(lam[list(tri).index(node)])
    return 0.0
