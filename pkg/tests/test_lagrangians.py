"""Lagrangian catalog: evaluators, self-check, Hessians, serialisation."""

from __future__ import annotations

import numpy as np
import pytest

from tscv import lagrangians as lag
from tscv.lagrangians import LagrangianError


def _catalog():
    return [
        lag.free_particle(),
        lag.harmonic_oscillator(2, omega=1.7),
        lag.Quadratic([[2.0, 0.3], [0.3, 1.0]], [[1.0, -0.2], [-0.2, 0.5]], [0.1, -0.4]),
        lag.Counterexample(),
        lag.Rotational(),
        lag.forced_oscillator(),
        lag.Polynomial(
            (
                lag.Monomial(0.5, (0, 0), (2, 0)),
                lag.Monomial(0.5, (0, 0), (0, 2)),
                lag.Monomial(0.25, (2, 0), (0, 1), 1),
                lag.Monomial(-0.1, (1, 3), (1, 0)),
                lag.Monomial(0.05, (0, 0), (4, 0)),
            )
        ),
    ]


@pytest.mark.parametrize("L", _catalog(), ids=lambda L: f"{L.kind}-{L.dim}")
def test_gradients_match_finite_differences(L):
    L.self_check(probes=20, seed=3)


@pytest.mark.parametrize("L", _catalog(), ids=lambda L: f"{L.kind}-{L.dim}")
def test_hessian_matches_finite_differences(L):
    rng = np.random.default_rng(11)
    n = L.dim
    X = rng.uniform(-1, 1, (6, n))
    V = rng.uniform(-1, 1, (6, n))
    T = rng.uniform(0, 1, 6)
    Lxx, Lxv, Lvv = L.hessian(X, V, T)
    h = 1e-6
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        dQ_dxi = (L.dLdx(X + e, V, T) - L.dLdx(X - e, V, T)) / (2 * h)
        dQ_dvi = (L.dLdx(X, V + e, T) - L.dLdx(X, V - e, T)) / (2 * h)
        dP_dvi = (L.dLdv(X, V + e, T) - L.dLdv(X, V - e, T)) / (2 * h)
        np.testing.assert_allclose(Lxx[:, :, i], dQ_dxi, atol=1e-7)
        np.testing.assert_allclose(Lxv[:, :, i], dQ_dvi, atol=1e-7)
        np.testing.assert_allclose(Lvv[:, :, i], dP_dvi, atol=1e-7)


@pytest.mark.parametrize("L", _catalog(), ids=lambda L: f"{L.kind}-{L.dim}")
def test_dict_round_trip(L):
    M = lag.from_dict(L.to_dict())
    assert M.to_dict() == L.to_dict()
    rng = np.random.default_rng(0)
    X, V, T = rng.normal(size=(4, L.dim)), rng.normal(size=(4, L.dim)), rng.normal(size=4)
    np.testing.assert_array_equal(M.value(X, V, T), L.value(X, V, T))


def test_catalog_values():
    assert lag.Counterexample().value([[2.0]], [[3.0]], [0.0])[0] == 2.0 + 4.5
    assert lag.Rotational().value([[1.0, 2.0]], [[3.0, 4.0]], [0.0])[0] == 5.0 + 25.0
    L = lag.forced_oscillator()
    assert L.value([[2.0]], [[1.0]], [3.0])[0] == 0.5 - 2.0 + 6.0
    assert not L.time_independent


def test_asymmetric_quadratic_rejected():
    with pytest.raises(LagrangianError, match="symmetric"):
        lag.Quadratic([[1.0, 1.0], [0.0, 1.0]], np.eye(2))


def test_dimension_mismatch():
    with pytest.raises(LagrangianError):
        lag.Rotational().value([[1.0]], [[1.0]], [0.0])


def test_bad_gradient_caught_by_self_check():
    class Broken(lag.Quadratic):
        def dLdv(self, X, V, T):
            return 1.01 * super().dLdv(X, V, T)

    with pytest.raises(LagrangianError, match="finite differences"):
        Broken(np.eye(1), np.eye(1))


def test_from_dict_rejects_unknown():
    with pytest.raises(LagrangianError):
        lag.from_dict({"kind": "rotational", "mass": 2})
    with pytest.raises(LagrangianError):
        lag.from_dict({"kind": "cubic"})
    with pytest.raises(LagrangianError, match="missing"):
        lag.from_dict({"kind": "quadratic", "M": [[1.0]]})


def test_monomial_validation():
    with pytest.raises(LagrangianError):
        lag.Monomial(1.0, (-1,), (0,))
    with pytest.raises(LagrangianError):
        lag.Polynomial((lag.Monomial(1.0, (1,), (0,)), lag.Monomial(1.0, (1, 0), (0, 0))))
