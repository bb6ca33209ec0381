"""Closed-form solutions of the continuous Euler-Lagrange equation for convergence studies.

Registered problems:

* scalar quadratic ``L = ½ m v² − ½ k x² + c x`` (``m u'' = c − k u``), covering
  the free particle and the harmonic oscillator;
* the forced oscillator ``L = ½ v² − ½ x² + t x`` (``u'' = t − u``).
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import lagrangians as lag

__all__ = ["NoClosedForm", "closed_form", "has_closed_form"]


class NoClosedForm(LookupError):
    """No continuous solution is registered for this Lagrangian."""


def _fit(basis: list[Callable], particular: Callable, a, b, ua, ub) -> Callable:
    """``u = particular + α φ₀ + β φ₁`` matching ``u(a) = ua``, ``u(b) = ub``."""
    A = np.array([[basis[0](a), basis[1](a)], [basis[0](b), basis[1](b)]])
    rhs = np.array([ua - particular(a), ub - particular(b)])
    alpha, beta = np.linalg.solve(A, rhs)
    return lambda t: particular(t) + alpha * basis[0](t) + beta * basis[1](t)


def closed_form(L: lag.Lagrangian, a: float, b: float, ua, ub) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized ``t ↦ u(t)`` solving the continuous boundary-value problem."""
    ua = float(np.atleast_1d(ua)[0])
    ub = float(np.atleast_1d(ub)[0])
    if isinstance(L, lag.Quadratic) and L.dim == 1:
        m, k, c = float(L.M[0, 0]), float(L.K[0, 0]), float(L.c[0])
        if m <= 0:
            raise NoClosedForm("mass must be positive")
        if k > 0:
            w = math.sqrt(k / m)
            basis = [lambda t: np.cos(w * t), lambda t: np.sin(w * t)]
            if abs(math.sin(w * (b - a))) < 1e-12:
                raise NoClosedForm("boundary points are conjugate; the continuous problem is singular")
            return _fit(basis, lambda t: c / k + 0 * t, a, b, ua, ub)
        if k < 0:
            w = math.sqrt(-k / m)
            basis = [lambda t: np.cosh(w * t), lambda t: np.sinh(w * t)]
            return _fit(basis, lambda t: c / k + 0 * t, a, b, ua, ub)
        basis = [lambda t: 1.0 + 0 * t, lambda t: t]
        return _fit(basis, lambda t: c / (2 * m) * t**2, a, b, ua, ub)
    if L.to_dict() == lag.forced_oscillator().to_dict():
        basis = [lambda t: np.cos(t), lambda t: np.sin(t)]
        return _fit(basis, lambda t: t, a, b, ua, ub)
    raise NoClosedForm(f"no closed-form solution registered for a {L.kind} Lagrangian of dimension {L.dim}")


def has_closed_form(L: lag.Lagrangian) -> bool:
    try:
        closed_form(L, 0.0, 1.0, 0.0, 1.0)
    except NoClosedForm:
        return False
    return True
