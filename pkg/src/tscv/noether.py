"""One-parameter transformation families, invariance checks and Noether constants of motion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lagrangians import Lagrangian
from .timescale import GridFunction, delta_derivative, nabla_derivative

__all__ = [
    "TransformationFamily",
    "InvarianceReport",
    "DriftReport",
    "NoetherError",
    "expm",
    "translation",
    "rotation",
    "linear_flow",
    "check_invariance",
    "noether_constant",
    "noether_constant_nabla",
    "drift",
]


class NoetherError(ValueError):
    """Invalid transformation family or mismatched dimensions."""


def expm(M: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Matrix exponential by scaling and squaring of the Taylor series.

    ``M`` is scaled by ``2^-s`` so that its 1-norm is at most 1/2, the series
    is summed until the next term is below ``tol`` relative to the partial
    sum, and the result squared ``s`` times.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise NoetherError("expm needs a square matrix")
    norm = float(np.max(np.sum(np.abs(M), axis=0))) if M.size else 0.0
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    A = M / 2.0**s
    E = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for j in range(1, 60):
        term = term @ A / j
        E = E + term
        if np.max(np.abs(term)) <= tol * 1e-3 * np.max(np.abs(E)):
            break
    for _ in range(s):
        E = E @ E
    return E


@dataclass(frozen=True, eq=False)
class TransformationFamily:
    """``Φ(θ, x)`` for ``|θ| ≤ eta``.

    ``kind`` is ``"translation"`` (``params["direction"]``), ``"rotation"``
    (``params["plane"] = (i, j)`` and ``params["dim"]``) or ``"linear_flow"``
    (``params["A"]``).
    """

    kind: str
    params: dict
    eta: float = 1.0

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise NoetherError("eta must be positive")
        p = dict(self.params)
        if self.kind == "translation":
            d = np.atleast_1d(np.asarray(p.get("direction"), dtype=float))
            if d.ndim != 1 or d.size < 1:
                raise NoetherError("translation needs a direction vector")
            p = {"direction": d}
            n = d.size
        elif self.kind == "rotation":
            n = int(p.get("dim", 2))
            i, j = (int(x) for x in p.get("plane", (0, 1)))
            if not (0 <= i < n and 0 <= j < n and i != j):
                raise NoetherError(f"invalid rotation plane {(i, j)} in dimension {n}")
            p = {"plane": (i, j), "dim": n}
        elif self.kind == "linear_flow":
            A = np.atleast_2d(np.asarray(p.get("A"), dtype=float))
            if A.shape[0] != A.shape[1]:
                raise NoetherError("linear flow generator must be square")
            p = {"A": A}
            n = A.shape[0]
        else:
            raise NoetherError(f"unknown transformation kind {self.kind!r}")
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "_n", n)
        probes = np.random.default_rng(0).normal(size=(8, n))
        if np.max(np.abs(self.phi(0.0, probes) - probes)) != 0.0:
            raise NoetherError(f"{self.kind}: Φ(0, ·) is not the identity")

    @property
    def dim(self) -> int:
        return self._n

    def _rot(self, theta: float) -> np.ndarray:
        i, j = self.params["plane"]
        R = np.eye(self.dim)
        c, s = math.cos(theta), math.sin(theta)
        R[i, i], R[i, j], R[j, i], R[j, j] = c, -s, s, c
        return R

    def matrix(self, theta: float) -> np.ndarray:
        """Linear part of ``Φ(θ, ·)`` (identity for translations)."""
        if self.kind == "translation":
            return np.eye(self.dim)
        if self.kind == "rotation":
            return self._rot(theta)
        if theta == 0.0:
            return np.eye(self.dim)
        return expm(theta * self.params["A"])

    def phi(self, theta: float, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise NoetherError(f"expected dimension {self.dim}, got {X.shape[1]}")
        if self.kind == "translation":
            return X + theta * self.params["direction"]
        return X @ self.matrix(theta).T

    def dphi_dtheta(self, theta: float, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise NoetherError(f"expected dimension {self.dim}, got {X.shape[1]}")
        if self.kind == "translation":
            return np.broadcast_to(self.params["direction"], X.shape).copy()
        if self.kind == "rotation":
            i, j = self.params["plane"]
            G = np.zeros((self.dim, self.dim))
            G[i, j], G[j, i] = -1.0, 1.0
            gen = G @ self._rot(theta)
        else:
            gen = self.params["A"] @ self.matrix(theta)
        return X @ gen.T

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "eta": self.eta}
        if self.kind == "translation":
            out["direction"] = self.params["direction"].tolist()
        elif self.kind == "rotation":
            out["plane"] = list(self.params["plane"])
            out["dim"] = self.params["dim"]
        else:
            out["A"] = self.params["A"].tolist()
        return out


def translation(direction, eta: float = 1.0) -> TransformationFamily:
    return TransformationFamily("translation", {"direction": direction}, eta)


def rotation(plane=(0, 1), dim: int = 2, eta: float = math.pi) -> TransformationFamily:
    return TransformationFamily("rotation", {"plane": plane, "dim": dim}, eta)


def linear_flow(A, eta: float = 1.0) -> TransformationFamily:
    return TransformationFamily("linear_flow", {"A": A}, eta)


@dataclass(frozen=True)
class InvarianceReport:
    invariant: bool
    max_theta_variation: float
    probed_thetas: tuple[float, ...]
    tolerance: float

    def summary(self) -> dict:
        return {
            "invariant": bool(self.invariant),
            "max_theta_variation": float(self.max_theta_variation),
            "probed_thetas": [float(t) for t in self.probed_thetas],
            "tolerance": float(self.tolerance),
        }


def _check_dims(L: Lagrangian, Phi: TransformationFamily, u: GridFunction) -> None:
    if not (L.dim == Phi.dim == u.dim):
        raise NoetherError(
            f"dimension mismatch: Lagrangian {L.dim}, family {Phi.dim}, trajectory {u.dim}"
        )
    if not u.is_full:
        raise NoetherError("the trajectory must be given on the whole scale")


def check_invariance(
    L: Lagrangian,
    Phi: TransformationFamily,
    u: GridFunction,
    thetas: int = 9,
    tol: float | None = None,
) -> InvarianceReport:
    """Evaluate ``θ ↦ L(Φ(θ, u), Φ(θ, u)^Δ, t)`` on ``T^κ`` for ``thetas`` values in ``[−η, η]``.

    The default tolerance is ``1e−10 · max(1, max |L|)``.
    """
    _check_dims(L, Phi, u)
    if thetas < 5:
        raise NoetherError(f"at least 5 θ samples are required, got {thetas}")
    grid = np.linspace(-Phi.eta, Phi.eta, thetas)
    T = u.scale.points[:-1]

    def lag(theta: float) -> np.ndarray:
        v = GridFunction(u.scale, Phi.phi(theta, u.values))
        return L.value(v.values[:-1], delta_derivative(v).values, T)

    base = lag(0.0)
    if tol is None:
        tol = 1e-10 * max(1.0, float(np.max(np.abs(base))))
    dev = max(float(np.max(np.abs(lag(th) - base))) for th in grid)
    return InvarianceReport(dev <= tol, dev, tuple(float(x) for x in grid), float(tol))


def noether_constant(L: Lagrangian, Phi: TransformationFamily, u: GridFunction) -> GridFunction:
    """``I(t_k) = ∂L/∂v(u_k, u^Δ_k, t_k) · ∂Φ/∂θ(0, u(σ(t_k)))`` for ``k = 0..N−2``."""
    _check_dims(L, Phi, u)
    W = delta_derivative(u).values
    p = L.dLdv(u.values[:-1], W, u.scale.points[:-1])
    xi = Phi.dphi_dtheta(0.0, u.values[1:])
    return GridFunction(u.scale, np.sum(p * xi, axis=1), 0)


def noether_constant_nabla(L: Lagrangian, Phi: TransformationFamily, u: GridFunction) -> GridFunction:
    """``I(t_k) = ∂L/∂v(u_k, u^∇_k, t_k) · ∂Φ/∂θ(0, u(ρ(t_k)))`` for ``k = 1..N−1``."""
    _check_dims(L, Phi, u)
    Y = nabla_derivative(u).values
    p = L.dLdv(u.values[1:], Y, u.scale.points[1:])
    xi = Phi.dphi_dtheta(0.0, u.values[:-1])
    return GridFunction(u.scale, np.sum(p * xi, axis=1), 1)


@dataclass(frozen=True)
class DriftReport:
    mean: float
    max_abs_deviation_from_mean: float
    linear_slope: float

    def summary(self) -> dict:
        return {
            "mean": self.mean,
            "max_abs_deviation_from_mean": self.max_abs_deviation_from_mean,
            "linear_slope": self.linear_slope,
        }


def drift(I: GridFunction) -> DriftReport:
    """Deviation from the mean and least-squares slope of a scalar grid function."""
    y = I.scalar()
    t = I.times
    if np.all(y == y[0]):
        return DriftReport(float(y[0]), 0.0, 0.0)
    mean = math.fsum(y) / y.size
    dev = float(np.max(np.abs(y - mean)))
    if y.size < 2:
        return DriftReport(mean, dev, 0.0)
    tc = t - math.fsum(t) / t.size
    slope = math.fsum(tc * (y - mean)) / math.fsum(tc * tc)
    return DriftReport(mean, dev, float(slope))
