"""Riemann-Liouville and Riesz fractional derivatives in closed form.

Sign conventions used throughout the package (``0 < mu < 1``)::

    left  D^mu f(x) =  1/Gamma(1-mu) d/dx  int_a^x (x-w)^(-mu) f(w) dw
    right D^mu f(x) = -1/Gamma(1-mu) d/dx  int_x^b (w-x)^(-mu) f(w) dw

so that for ``mu -> 1`` the left derivative tends to ``f'`` and the right
one to ``-f'``. For ``1 < alpha < 2`` both one-sided operators carry the
factor ``d^2/dx^2`` (no sign change), and the Riesz operator is normalised
to have Fourier symbol ``|xi|^alpha`` (it tends to ``-d^2/dx^2``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from fracocp.mesh import PiecewiseLinearTrace


@dataclass(frozen=True)
class FracOrder:
    """Riesz order ``alpha`` in (1, 2); the bilinear form uses ``mu = alpha / 2``."""

    alpha: float

    def __post_init__(self):
        if not (1.0 < self.alpha < 2.0):
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha}")

    @property
    def mu(self) -> float:
        return 0.5 * self.alpha

    @property
    def riesz_factor(self) -> float:
        """``1 / (2 cos(pi alpha / 2))``, strictly negative."""
        return riesz_factor(self.alpha)


def riesz_factor(alpha: float) -> float:
    return 1.0 / (2.0 * np.cos(0.5 * np.pi * alpha))


def _check_mu(mu: float) -> None:
    if not (0.0 < mu < 1.0):
        raise ValueError(f"mu must lie in (0, 1), got {mu}")


def truncated_power(z, e: float) -> np.ndarray:
    """``z**e`` where ``z > 0`` and 0 elsewhere (also for negative ``e``)."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = z[pos] ** e
    return out


def _ramp_and_step_terms(trace: PiecewiseLinearTrace):
    t = trace.breakpoints
    return t, trace.slope_jumps, trace.values[0], trace.values[-1]


def rl_left_pwl(trace: PiecewiseLinearTrace, mu: float, x, left_endpoint: float | None = None):
    """Left Riemann-Liouville derivative of order ``mu`` of a piecewise-linear trace.

    The trace is written as a sum of ramps ``d_k (x - t_k)_+`` (``d_k`` the
    slope jumps) plus steps at the ends of its support; each maps to a
    truncated power. Exact up to rounding.
    """
    _check_mu(mu)
    x = np.asarray(x, dtype=float)
    if trace.is_empty:
        return np.zeros_like(x)
    t, d, v0, vm = _ramp_and_step_terms(trace)
    if left_endpoint is not None and left_endpoint > t[0]:
        raise ValueError("left endpoint must not exceed the start of the trace support")
    z = x[..., None] - t
    out = truncated_power(z, 1.0 - mu) @ d / gamma(2.0 - mu)
    if v0 != 0.0 or vm != 0.0:
        out = out + (v0 * truncated_power(z[..., 0], -mu) - vm * truncated_power(z[..., -1], -mu)) / gamma(1.0 - mu)
    return out


def rl_right_pwl(trace: PiecewiseLinearTrace, mu: float, x, right_endpoint: float | None = None):
    """Right Riemann-Liouville derivative of order ``mu``; mirror of :func:`rl_left_pwl`."""
    _check_mu(mu)
    x = np.asarray(x, dtype=float)
    if trace.is_empty:
        return np.zeros_like(x)
    t, d, v0, vm = _ramp_and_step_terms(trace)
    if right_endpoint is not None and right_endpoint < t[-1]:
        raise ValueError("right endpoint must not precede the end of the trace support")
    z = t - x[..., None]
    out = truncated_power(z, 1.0 - mu) @ d / gamma(2.0 - mu)
    if v0 != 0.0 or vm != 0.0:
        out = out + (vm * truncated_power(z[..., -1], -mu) - v0 * truncated_power(z[..., 0], -mu)) / gamma(1.0 - mu)
    return out


def _check_monomial(p: int, mu: float) -> None:
    if int(p) != p or p < 1:
        raise ValueError(f"monomial degree must be a positive integer, got {p}")
    if not (0.0 < mu < 2.0):
        raise ValueError(f"mu must lie in (0, 2), got {mu}")
    arg = p + 1 - mu
    if arg <= 0 and float(arg).is_integer():
        raise ValueError(f"Gamma({arg}) is a pole")


def rl_left_monomial(p: int, mu: float, x, a: float = 0.0):
    """Left RL derivative of ``(x - a)**p``: ``p! / Gamma(p + 1 - mu) (x - a)**(p - mu)``."""
    _check_monomial(p, mu)
    x = np.asarray(x, dtype=float)
    if np.any(x < a):
        raise ValueError("x must not lie left of the base point")
    with np.errstate(divide="ignore"):
        return gamma(p + 1.0) / gamma(p + 1.0 - mu) * (x - a) ** (p - mu)


def rl_right_monomial(p: int, mu: float, x, b: float = 1.0):
    """Right RL derivative of ``(b - x)**p``."""
    _check_monomial(p, mu)
    x = np.asarray(x, dtype=float)
    if np.any(x > b):
        raise ValueError("x must not lie right of the base point")
    with np.errstate(divide="ignore"):
        return gamma(p + 1.0) / gamma(p + 1.0 - mu) * (b - x) ** (p - mu)


def bubble_rl_left(mu: float, x, a: float = 0.0, b: float = 1.0):
    """Left RL derivative of ``w(x) = (x - a)(b - x) = L s - s**2``, ``s = x - a``."""
    return (b - a) * rl_left_monomial(1, mu, x, a) - rl_left_monomial(2, mu, x, a)


def bubble_rl_right(mu: float, x, a: float = 0.0, b: float = 1.0):
    """Right RL derivative of ``w(x) = (x - a)(b - x) = L r - r**2``, ``r = b - x``."""
    return (b - a) * rl_right_monomial(1, mu, x, b) - rl_right_monomial(2, mu, x, b)


def riesz_bubble(x, alpha: float, a: float = 0.0, b: float = 1.0):
    """Riesz derivative of order ``alpha`` of the bubble ``(x - a)(b - x)``.

    Normalised as the operator with symbol ``|xi|^alpha``, i.e. the strong
    form of the bilinear form used by the stiffness matrix; at
    ``alpha -> 2`` it tends to ``-w'' = 2``. Singular like
    ``(x - a)^(1 - alpha)`` at the endpoints.
    """
    FracOrder(alpha)
    x = np.asarray(x, dtype=float)
    if np.any((x < a) | (x > b)):
        raise ValueError("x must lie in [a, b]")
    total = bubble_rl_left(alpha, x, a, b) + bubble_rl_right(alpha, x, a, b)
    return riesz_factor(alpha) * total
