"""Catalog of Lagrangians ``L(x, v, t)`` with analytic first and second derivatives.

Every evaluator is batched: ``X`` and ``V`` are ``(m, n)`` arrays of positions
and velocities, ``T`` an ``(m,)`` array of times.  Hessian blocks are returned
as ``(m, n, n)`` arrays with ``Lxv[:, i, j] = ∂²L/∂x_i∂v_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Lagrangian",
    "Quadratic",
    "Counterexample",
    "Rotational",
    "Monomial",
    "Polynomial",
    "LagrangianError",
    "free_particle",
    "harmonic_oscillator",
    "forced_oscillator",
    "from_dict",
]


class LagrangianError(ValueError):
    """Invalid Lagrangian parameters or inconsistent derivatives."""


def _batch(X, V, T, n):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    T = np.atleast_1d(np.asarray(T, dtype=float))
    if X.shape[1] != n or V.shape[1] != n:
        raise LagrangianError(f"expected state dimension {n}, got {X.shape[1]}/{V.shape[1]}")
    return X, V, T


class Lagrangian:
    """Base class; subclasses implement the batched evaluators."""

    kind: str = "abstract"
    dim: int
    time_independent: bool = True

    def value(self, X, V, T) -> np.ndarray:
        raise NotImplementedError

    def dLdx(self, X, V, T) -> np.ndarray:
        raise NotImplementedError

    def dLdv(self, X, V, T) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, X, V, T) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(Lxx, Lxv, Lvv)`` blocks."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def self_check(self, probes: int = 5, seed: int = 0, rtol: float = 1e-6) -> None:
        """Compare analytic gradients with central differences at random points."""
        rng = np.random.default_rng(seed)
        n = self.dim
        X = rng.uniform(-1.5, 1.5, (probes, n))
        V = rng.uniform(-1.5, 1.5, (probes, n))
        T = rng.uniform(0.0, 1.0, probes)
        h = 1e-5
        for name, an, shift in (("dL/dx", self.dLdx(X, V, T), "x"), ("dL/dv", self.dLdv(X, V, T), "v")):
            fd = np.empty_like(an)
            for i in range(n):
                e = np.zeros(n)
                e[i] = h
                if shift == "x":
                    fd[:, i] = (self.value(X + e, V, T) - self.value(X - e, V, T)) / (2 * h)
                else:
                    fd[:, i] = (self.value(X, V + e, T) - self.value(X, V - e, T)) / (2 * h)
            scale = max(1.0, float(np.max(np.abs(an))))
            err = float(np.max(np.abs(fd - an)))
            if err > rtol * scale:
                raise LagrangianError(
                    f"{self.kind}: analytic {name} disagrees with finite differences ({err:.3g})"
                )


@dataclass(frozen=True, eq=False)
class Quadratic(Lagrangian):
    """``L = ½ vᵀMv − ½ xᵀKx + cᵀx`` with symmetric ``M`` and ``K``."""

    M: np.ndarray
    K: np.ndarray
    c: np.ndarray | None = None
    kind = "quadratic"

    def __post_init__(self) -> None:
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        n = M.shape[0]
        c = np.zeros(n) if self.c is None else np.atleast_1d(np.asarray(self.c, dtype=float))
        if M.shape != (n, n) or K.shape != (n, n) or c.shape != (n,):
            raise LagrangianError("M, K must be n×n and c of length n")
        if not (np.allclose(M, M.T, rtol=0, atol=1e-14) and np.allclose(K, K.T, rtol=0, atol=1e-14)):
            raise LagrangianError("M and K must be symmetric")
        for name, arr in (("M", M), ("K", K), ("c", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.self_check()

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    def value(self, X, V, T):
        X, V, T = _batch(X, V, T, self.dim)
        return (
            0.5 * np.einsum("mi,ij,mj->m", V, self.M, V)
            - 0.5 * np.einsum("mi,ij,mj->m", X, self.K, X)
            + X @ self.c
        )

    def dLdx(self, X, V, T):
        X, V, T = _batch(X, V, T, self.dim)
        return self.c - X @ self.K

    def dLdv(self, X, V, T):
        X, V, T = _batch(X, V, T, self.dim)
        return V @ self.M

    def hessian(self, X, V, T):
        X, V, T = _batch(X, V, T, self.dim)
        m, n = X.shape[0], self.dim
        return (
            np.broadcast_to(-self.K, (m, n, n)),
            np.zeros((m, n, n)),
            np.broadcast_to(self.M, (m, n, n)),
        )

    def to_dict(self) -> dict:
        return {"kind": "quadratic", "M": self.M.tolist(), "K": self.K.tolist(), "c": self.c.tolist()}


@dataclass(frozen=True, eq=False)
class Counterexample(Lagrangian):
    """``L = x + v²/2`` on the real line."""

    kind = "counterexample"
    dim = 1

    def __post_init__(self) -> None:
        self.self_check()

    def value(self, X, V, T):
        X, V, T = _batch(X, V, T, 1)
        return X[:, 0] + 0.5 * V[:, 0] ** 2

    def dLdx(self, X, V, T):
        X, V, T = _batch(X, V, T, 1)
        return np.ones_like(X)

    def dLdv(self, X, V, T):
        X, V, T = _batch(X, V, T, 1)
        return V.copy()

    def hessian(self, X, V, T):
        m = np.atleast_2d(X).shape[0]
        return np.zeros((m, 1, 1)), np.zeros((m, 1, 1)), np.ones((m, 1, 1))

    def to_dict(self) -> dict:
        return {"kind": "counterexample"}


@dataclass(frozen=True, eq=False)
class Rotational(Lagrangian):
    """``L = ‖x‖² + ‖v‖²`` in the plane."""

    kind = "rotational"
    dim = 2

    def __post_init__(self) -> None:
        self.self_check()

    def value(self, X, V, T):
        X, V, T = _batch(X, V, T, 2)
        return np.sum(X**2, axis=1) + np.sum(V**2, axis=1)

    def dLdx(self, X, V, T):
        X, V, T = _batch(X, V, T, 2)
        return 2.0 * X

    def dLdv(self, X, V, T):
        X, V, T = _batch(X, V, T, 2)
        return 2.0 * V

    def hessian(self, X, V, T):
        m = np.atleast_2d(X).shape[0]
        eye = np.broadcast_to(2.0 * np.eye(2), (m, 2, 2))
        return eye, np.zeros((m, 2, 2)), eye

    def to_dict(self) -> dict:
        return {"kind": "rotational"}


@dataclass(frozen=True)
class Monomial:
    """``coef · Π x_i^{px_i} · Π v_i^{pv_i} · t^{pt}``."""

    coef: float
    px: tuple[int, ...]
    pv: tuple[int, ...]
    pt: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "px", tuple(int(p) for p in self.px))
        object.__setattr__(self, "pv", tuple(int(p) for p in self.pv))
        if any(p < 0 for p in (*self.px, *self.pv, self.pt)):
            raise LagrangianError("monomial exponents must be non-negative integers")
        if len(self.px) != len(self.pv):
            raise LagrangianError("x and v exponent vectors must have the same length")

    def powers(self) -> np.ndarray:
        return np.array(self.px + self.pv, dtype=int)


def _mono_eval(coef: float, powers: np.ndarray, Z: np.ndarray, tfac: np.ndarray) -> np.ndarray:
    return coef * tfac * np.prod(Z**powers, axis=1)


@dataclass(frozen=True, eq=False)
class Polynomial(Lagrangian):
    """Finite sum of monomials in the components of ``x``, ``v`` and in ``t``."""

    terms: tuple[Monomial, ...]
    kind = "polynomial"

    def __post_init__(self) -> None:
        terms = tuple(Monomial(*t) if not isinstance(t, Monomial) else t for t in self.terms)
        if not terms:
            raise LagrangianError("a polynomial Lagrangian needs at least one term")
        n = len(terms[0].px)
        if n < 1 or any(len(t.px) != n for t in terms):
            raise LagrangianError("all monomials must share the same state dimension")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_n", n)
        self.self_check()

    @property
    def dim(self) -> int:
        return self._n

    @property
    def time_independent(self) -> bool:
        return all(t.pt == 0 for t in self.terms)

    def _Z(self, X, V, T):
        X, V, T = _batch(X, V, T, self.dim)
        return np.hstack([X, V]), T

    def value(self, X, V, T):
        Z, T = self._Z(X, V, T)
        out = np.zeros(Z.shape[0])
        for m in self.terms:
            out += _mono_eval(m.coef, m.powers(), Z, T**m.pt)
        return out

    def _grad(self, Z, T):
        out = np.zeros_like(Z)
        for m in self.terms:
            p = m.powers()
            tf = T**m.pt
            for i in np.nonzero(p)[0]:
                q = p.copy()
                q[i] -= 1
                out[:, i] += _mono_eval(m.coef * p[i], q, Z, tf)
        return out

    def dLdx(self, X, V, T):
        Z, T = self._Z(X, V, T)
        return self._grad(Z, T)[:, : self.dim]

    def dLdv(self, X, V, T):
        Z, T = self._Z(X, V, T)
        return self._grad(Z, T)[:, self.dim :]

    def hessian(self, X, V, T):
        Z, T = self._Z(X, V, T)
        m_, n2 = Z.shape
        H = np.zeros((m_, n2, n2))
        for m in self.terms:
            p = m.powers()
            tf = T**m.pt
            nz = np.nonzero(p)[0]
            for i in nz:
                for j in nz:
                    q = p.copy()
                    q[i] -= 1
                    fac = p[i] * q[j]
                    if fac == 0:
                        continue
                    q[j] -= 1
                    H[:, i, j] += _mono_eval(m.coef * fac, q, Z, tf)
        n = self.dim
        return H[:, :n, :n], H[:, :n, n:], H[:, n:, n:]

    def to_dict(self) -> dict:
        return {
            "kind": "polynomial",
            "terms": [
                {"coef": t.coef, "x": list(t.px), "v": list(t.pv), "t": t.pt} for t in self.terms
            ],
        }


def free_particle(n: int = 1, mass: float = 1.0) -> Quadratic:
    """``L = (mass/2)‖v‖²``."""
    return Quadratic(mass * np.eye(n), np.zeros((n, n)))


def harmonic_oscillator(n: int = 1, omega: float = 1.0) -> Quadratic:
    """``L = ½‖v‖² − (ω²/2)‖x‖²``."""
    return Quadratic(np.eye(n), omega**2 * np.eye(n))


def forced_oscillator() -> Polynomial:
    """``L = ½v² − ½x² + t·x``, whose Euler-Lagrange equation is ``u'' = t − u``."""
    return Polynomial(
        (Monomial(0.5, (0,), (2,)), Monomial(-0.5, (2,), (0,)), Monomial(1.0, (1,), (0,), 1))
    )


def from_dict(spec: dict) -> Lagrangian:
    """Build a catalog Lagrangian from its ``to_dict`` form."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "quadratic":
            allowed = {"M", "K", "c"}
            _reject_extra(spec, allowed, kind)
            return Quadratic(np.array(spec["M"], float), np.array(spec["K"], float), spec.get("c"))
        if kind == "counterexample":
            _reject_extra(spec, set(), kind)
            return Counterexample()
        if kind == "rotational":
            _reject_extra(spec, set(), kind)
            return Rotational()
        if kind == "polynomial":
            _reject_extra(spec, {"terms"}, kind)
            terms = []
            for t in spec["terms"]:
                _reject_extra(t, {"coef", "x", "v", "t"}, "polynomial term")
                terms.append(Monomial(float(t["coef"]), tuple(t["x"]), tuple(t["v"]), int(t.get("t", 0))))
            return Polynomial(tuple(terms))
    except KeyError as exc:
        raise LagrangianError(f"{kind} Lagrangian is missing the key {exc}") from None
    raise LagrangianError(f"unknown Lagrangian kind {kind!r}")


def _reject_extra(spec: dict, allowed: set, what: str) -> None:
    extra = set(spec) - allowed
    if extra:
        raise LagrangianError(f"unknown keys for {what}: {sorted(extra)}")
