"""The non-shifted variational functional on a finite time scale and its Euler-Lagrange residuals.

For a trajectory ``u`` on a grid ``t_0 < ... < t_{N-1}`` the functional is

    𝓛(u) = Σ_{k=0}^{N-2} μ_k L(u_k, u^Δ_k, t_k).

Four residual forms are provided:

``integral_delta``
    ``∂L/∂v(u, u^Δ, t) − ∫_a^{σ(t)} ∂L/∂x Δτ − c`` on ``T^κ`` with ``c`` fitted.
``diff_nabla_delta``
    ``[∂L/∂v(u, u^Δ, ·)]^∇ − σ^∇ ∂L/∂x(u, u^Δ, ·)`` on ``T^κ_κ``.
``diff_delta_delta_shifted``
    ``[∂L/∂v(u^σ, u^Δ, ·)]^Δ − ∂L/∂x(u^σ, u^Δ, ·)`` on indices ``0..N-3``
    (the equation of the shifted functional).
``diff_delta_nabla``
    ``[∂L/∂v(u, u^∇, ·)]^Δ − ρ^Δ ∂L/∂x(u, u^∇, ·)`` on ``T^κ_κ``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lagrangians import Lagrangian
from .timescale import (
    GridFunction,
    TimeScaleError,
    compensated_cumsum,
    delta_derivative,
    nabla_derivative,
)

__all__ = [
    "ResidualForm",
    "ELResidualReport",
    "VariationalError",
    "functional_value",
    "functional_value_nabla",
    "gateaux_derivative",
    "residual_integral_delta",
    "residual_diff_nabla_delta",
    "residual_diff_delta_delta_shifted",
    "residual_diff_delta_nabla",
    "residual",
    "all_residuals",
    "sigma_nabla_table",
]


class VariationalError(ValueError):
    """Dimension mismatch or inadmissible variation."""


class ResidualForm(Enum):
    INTEGRAL_DELTA = "integral_delta"
    DIFF_NABLA_DELTA = "diff_nabla_delta"
    DIFF_DELTA_DELTA_SHIFTED = "diff_delta_delta_shifted"
    DIFF_DELTA_NABLA = "diff_delta_nabla"


@dataclass(frozen=True, eq=False)
class ELResidualReport:
    """Per-point residual vectors of one Euler-Lagrange form.

    ``indices`` are absolute scale indices of the form's domain and
    ``residuals[i]`` is the residual vector at ``indices[i]``.
    """

    form: ResidualForm
    indices: np.ndarray
    times: np.ndarray
    residuals: np.ndarray
    max_norm: float
    fitted_constant: np.ndarray | None = None

    @classmethod
    def build(cls, form, u: GridFunction, start: int, residuals, fitted=None) -> "ELResidualReport":
        residuals = np.atleast_2d(np.asarray(residuals, dtype=float))
        idx = np.arange(start, start + residuals.shape[0])
        norms = np.linalg.norm(residuals, axis=1)
        return cls(
            form=form,
            indices=idx,
            times=u.scale.points[idx],
            residuals=residuals,
            max_norm=float(norms.max()) if norms.size else 0.0,
            fitted_constant=None if fitted is None else np.asarray(fitted, dtype=float),
        )

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.residuals, axis=1)

    def to_csv(self) -> str:
        n = self.residuals.shape[1]
        lines = [",".join(["k", "t", *[f"r_{i + 1}" for i in range(n)], "norm"])]
        for k, t, r, nr in zip(self.indices, self.times, self.residuals, self.norms):
            lines.append(",".join([str(int(k)), repr(float(t)), *(repr(float(x)) for x in r), repr(float(nr))]))
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "form": self.form.value,
            "max_norm": self.max_norm,
            "fitted_constant": None
            if self.fitted_constant is None
            else [float(x) for x in self.fitted_constant],
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _check(L: Lagrangian, u: GridFunction) -> None:
    if u.dim != L.dim:
        raise VariationalError(f"trajectory dimension {u.dim} does not match Lagrangian dimension {L.dim}")
    if not u.is_full:
        raise VariationalError("the trajectory must be given on the whole scale")


def _delta_state(u: GridFunction):
    """Arrays ``(X, W, T)`` on ``T^κ``: positions, Δ-derivatives, times."""
    X = u.values[:-1]
    W = delta_derivative(u).values
    return X, W, u.scale.points[:-1]


def functional_value(L: Lagrangian, u: GridFunction) -> float:
    """``Σ_{k ∈ T^κ} μ_k L(u_k, u^Δ_k, t_k)``."""
    _check(L, u)
    X, W, T = _delta_state(u)
    return math.fsum(u.scale.mus[:-1] * L.value(X, W, T))


def functional_value_nabla(L: Lagrangian, u: GridFunction) -> float:
    """``Σ_{k ∈ T_κ} ν_k L(u_k, u^∇_k, t_k)``, the ∇ counterpart."""
    _check(L, u)
    Y = nabla_derivative(u).values
    return math.fsum(u.scale.nus[1:] * L.value(u.values[1:], Y, u.scale.points[1:]))


def gateaux_derivative(L: Lagrangian, u: GridFunction, w: GridFunction) -> float:
    """``D𝓛(u)(w) = Σ_{k ∈ T^κ} μ_k [∂L/∂x · w + ∂L/∂v · w^Δ](t_k)``.

    The direction must vanish at both end points.
    """
    _check(L, u)
    if w.scale != u.scale or not w.is_full or w.dim != u.dim:
        raise VariationalError("direction w must be a full grid function on the trajectory's scale")
    if np.any(w.values[0] != 0) or np.any(w.values[-1] != 0):
        raise VariationalError("admissible variations satisfy w(a) = w(b) = 0")
    X, W, T = _delta_state(u)
    dw = delta_derivative(w).values
    terms = u.scale.mus[:-1, None] * (L.dLdx(X, W, T) * w.values[:-1] + L.dLdv(X, W, T) * dw)
    return math.fsum(terms.ravel())


def residual_integral_delta(L: Lagrangian, u: GridFunction) -> ELResidualReport:
    """Integral form on ``T^κ``; the constant is fitted by least squares (the mean)."""
    _check(L, u)
    X, W, T = _delta_state(u)
    P = L.dLdv(X, W, T)
    Q = L.dLdx(X, W, T)
    # ∫_a^{σ(t_k)} Q Δτ = Σ_{j ≤ k} μ_j Q_j
    S = compensated_cumsum(u.scale.mus[:-1, None] * Q)[1:]
    D = P - S
    c = D.mean(axis=0)
    return ELResidualReport.build(ResidualForm.INTEGRAL_DELTA, u, 0, D - c, c)


def residual_diff_nabla_delta(L: Lagrangian, u: GridFunction) -> ELResidualReport:
    """``(P_k − P_{k−1})/ν_k − (μ_k/ν_k) Q_k`` for ``k = 1..N−2``."""
    _check(L, u)
    X, W, T = _delta_state(u)
    P = L.dLdv(X, W, T)
    Q = L.dLdx(X, W, T)
    mu, nu = u.scale.mus, u.scale.nus
    k = slice(1, len(u.scale) - 1)
    r = (P[1:] - P[:-1]) / nu[k, None] - (mu[k] / nu[k])[:, None] * Q[1:]
    return ELResidualReport.build(ResidualForm.DIFF_NABLA_DELTA, u, 1, r)


def residual_diff_delta_delta_shifted(L: Lagrangian, u: GridFunction) -> ELResidualReport:
    """``(P'_{j+1} − P'_j)/μ_j − Q'_j`` for ``j = 0..N−3`` with arguments ``(u_{j+1}, u^Δ_j, t_j)``."""
    _check(L, u)
    X = u.values[1:]
    W = delta_derivative(u).values
    T = u.scale.points[:-1]
    P = L.dLdv(X, W, T)
    Q = L.dLdx(X, W, T)
    mu = u.scale.mus[: len(u.scale) - 2]
    r = (P[1:] - P[:-1]) / mu[:, None] - Q[:-1]
    return ELResidualReport.build(ResidualForm.DIFF_DELTA_DELTA_SHIFTED, u, 0, r)


def residual_diff_delta_nabla(L: Lagrangian, u: GridFunction) -> ELResidualReport:
    """``(R_{k+1} − R_k)/μ_k − (ν_k/μ_k) S_k`` for ``k = 1..N−2`` with arguments ``(u_k, u^∇_k, t_k)``."""
    _check(L, u)
    Y = nabla_derivative(u).values  # rows are indices 1..N-1
    X = u.values[1:]
    T = u.scale.points[1:]
    R = L.dLdv(X, Y, T)
    S = L.dLdx(X, Y, T)
    mu, nu = u.scale.mus, u.scale.nus
    k = slice(1, len(u.scale) - 1)
    r = (R[1:] - R[:-1]) / mu[k, None] - (nu[k] / mu[k])[:, None] * S[:-1]
    return ELResidualReport.build(ResidualForm.DIFF_DELTA_NABLA, u, 1, r)


_DISPATCH = {
    ResidualForm.INTEGRAL_DELTA: residual_integral_delta,
    ResidualForm.DIFF_NABLA_DELTA: residual_diff_nabla_delta,
    ResidualForm.DIFF_DELTA_DELTA_SHIFTED: residual_diff_delta_delta_shifted,
    ResidualForm.DIFF_DELTA_NABLA: residual_diff_delta_nabla,
}


def residual(L: Lagrangian, u: GridFunction, form: ResidualForm | str) -> ELResidualReport:
    return _DISPATCH[ResidualForm(form)](L, u)


def all_residuals(L: Lagrangian, u: GridFunction) -> dict[str, ELResidualReport]:
    """All four forms keyed by their names (in declaration order)."""
    return {f.value: fn(L, u) for f, fn in _DISPATCH.items()}


def sigma_nabla_table(
    L: Lagrangian, u: GridFunction, labelled: dict[int, int]
) -> list[dict]:
    """Both sides of the ∇∘Δ equation at selected interior points.

    *labelled* maps grid indices to labels (e.g. the sequence index ``k`` of
    ``z_k``).  Each row holds ``σ^∇ = μ/ν`` on the grid, the ∇-derivative of
    ``∂L/∂v(u, u^Δ, ·)``, the weighted ``σ^∇ ∂L/∂x`` and their difference
    (first component).  Points outside ``T^κ_κ`` are skipped.
    """
    _check(L, u)
    X, W, T = _delta_state(u)
    P = L.dLdv(X, W, T)
    Q = L.dLdx(X, W, T)
    s = u.scale
    rows = []
    for idx, label in sorted(labelled.items(), key=lambda kv: kv[1]):
        if not 1 <= idx <= len(s) - 2:
            continue
        sn = s.sigma_nabla(idx)
        lhs = float((P[idx, 0] - P[idx - 1, 0]) / s.nu(idx))
        rhs = float(sn * Q[idx, 0])
        rows.append({
            "k": int(label),
            "t": float(s.points[idx]),
            "sigma_nabla": float(sn),
            "nabla_dLdv": lhs,
            "sigma_nabla_dLdx": rhs,
            "residual": lhs - rhs,
        })
    return rows
