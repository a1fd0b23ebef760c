"""Manufactured optimal control problem with polynomial bubble state and costate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fracocp.fracops import FracOrder, bubble_rl_left, bubble_rl_right, riesz_bubble
from fracocp.mesh import Domain
from fracocp.ocp import OCPProblem, project_control


def _bubble(t, lo, hi):
    return (t - lo) * (hi - t)


@dataclass(frozen=True)
class SeparableBubble:
    """``amplitude * (x - a)(b - x)(y - c)(d - y)`` with closed-form fractional derivatives."""

    amplitude: float
    domain: Domain = Domain()

    def __call__(self, x, y):
        d = self.domain
        return self.amplitude * _bubble(np.asarray(x, float), d.a, d.b) * _bubble(np.asarray(y, float), d.c, d.d)

    def _split(self, axis, x, y):
        d = self.domain
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if axis == "x":
            return x, self.amplitude * _bubble(y, d.c, d.d), d.a, d.b
        return y, self.amplitude * _bubble(x, d.a, d.b), d.c, d.d

    def rl_left(self, axis: str, mu: float, x, y):
        """Left RL derivative of order ``mu`` along ``axis``."""
        t, other, lo, hi = self._split(axis, x, y)
        return other * bubble_rl_left(mu, t, lo, hi)

    def rl_right(self, axis: str, mu: float, x, y):
        t, other, lo, hi = self._split(axis, x, y)
        return other * bubble_rl_right(mu, t, lo, hi)

    def riesz(self, axis: str, alpha: float, x, y):
        t, other, lo, hi = self._split(axis, x, y)
        return other * riesz_bubble(t, alpha, lo, hi)


@dataclass(frozen=True)
class ManufacturedCase:
    """Example with ``u = 10 XY``, ``p = 5 XY`` and ``q = P_K(-p / gamma)`` on the unit square.

    ``g`` and ``u_d`` are built from the state and adjoint equations so that
    ``(q, p, u)`` is the exact optimal triple.
    """

    alpha: float
    kappa1: float = 1.0
    kappa2: float = 1.0
    gamma: float = 1.0
    v1: float = -3.0
    v2: float = -0.1

    def __post_init__(self):
        FracOrder(self.alpha)

    @property
    def order(self) -> FracOrder:
        return FracOrder(self.alpha)

    @property
    def domain(self) -> Domain:
        return Domain(0.0, 1.0, 0.0, 1.0)

    @property
    def u(self) -> SeparableBubble:
        return SeparableBubble(10.0, self.domain)

    @property
    def p(self) -> SeparableBubble:
        return SeparableBubble(5.0, self.domain)

    def exact_u(self, x, y):
        return self.u(x, y)

    def exact_p(self, x, y):
        return self.p(x, y)

    def exact_q(self, x, y):
        return project_control(self.p(x, y), self.gamma, self.v1, self.v2)

    def _operator(self, field: SeparableBubble, x, y):
        return (self.kappa1 * field.riesz("x", self.alpha, x, y)
                + self.kappa2 * field.riesz("y", self.alpha, x, y))

    def source_g(self, x, y):
        return self._operator(self.u, x, y) - self.exact_q(x, y)

    def desired_state_ud(self, x, y):
        return self.exact_u(x, y) - self._operator(self.p, x, y)

    def problem(self) -> OCPProblem:
        return OCPProblem(self.order, self.kappa1, self.kappa2, self.gamma, self.v1, self.v2,
                          self.source_g, self.desired_state_ud)


CASES = {"example1": ManufacturedCase}
