"""Named problem fixtures.

``ex*`` presets reproduce the worked examples on time scales: the
counter-example to ∇-differentiating the integral equation (``ex1_*``), the
continuity catalogue of σ (``ex2_*``), scales with ∇-differentiable σ
(``ex3_*``) and scales with continuous but not ∇-differentiable σ (``ex4_*``).
The remaining presets are reference mechanics problems used by the solver and
Noether studies.

Each preset may carry an ``expect`` record (used by the test-suite) stating
the verdict it must reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .analysis import AnalyticScale, SequenceFamily, truncate_to_grid
from .config import ProblemConfig, from_dict
from .timescale import GridFunction, delta_antiderivative

__all__ = ["Preset", "PRESETS", "get_preset", "preset_names", "EX1_BUDGET"]

#: Counter-example truncation: {0} ∪ {1/k!, 1 ≤ k ≤ 12}.
EX1_BUDGET = 13


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    build: Callable[[], dict] = field(repr=False)
    expect: dict[str, Any] = field(default_factory=dict)

    def config(self) -> ProblemConfig:
        return from_dict(self.build())


def _fam(kind, **kw):
    return {"family": {"kind": kind, **kw}}


def _classify(cells, poi, **extra):
    def build():
        return {"scale": {"cells": cells, **extra}, "points_of_interest": poi}

    return build


QUAD1 = {"kind": "quadratic", "M": [[1.0]], "K": [[1.0]], "c": [0.0]}
FREE1 = {"kind": "quadratic", "M": [[1.0]], "K": [[0.0]], "c": [0.0]}
FORCED = {
    "kind": "polynomial",
    "terms": [
        {"coef": 0.5, "x": [0], "v": [2], "t": 0},
        {"coef": -0.5, "x": [2], "v": [0], "t": 0},
        {"coef": 1.0, "x": [1], "v": [0], "t": 1},
    ],
}
CONV_N = [11, 21, 41, 81, 161]


def _forced_exact(t):
    return t + np.cos(t) + 0.5 * np.sin(t)


def _ex1_boundary() -> tuple[list[float], list[float]]:
    """End values of ``u = ∫σ`` on the Counter-example truncation."""
    scale = AnalyticScale((SequenceFamily("factorial"),))
    grid = truncate_to_grid(scale, EX1_BUDGET).grid
    U = delta_antiderivative(GridFunction(grid, grid.sigmas[:-1]))
    return [float(U.values[0, 0])], [float(U.values[-1, 0])]


def _ex1():
    ua, ub = _ex1_boundary()
    return {
        "name": "ex1_counterexample",
        "scale": {"cells": [_fam("factorial")], "budget": EX1_BUDGET},
        "points_of_interest": [0.0],
        "lagrangian": {"kind": "counterexample"},
        "boundary": {"ua": ua, "ub": ub},
        "mode": "nabla-delta",
        "transformation": {"kind": "translation", "direction": [1.0], "eta": 1.0, "thetas": 9},
        "diagnostics": ["sigma_nabla_table"],
    }


def _ex1_small():
    # {0, 1, 2, 3}: σ = (1, 2, 3, 3), u = ∫σ = (0, 1, 3, 6)
    return {
        "name": "ex1_small_grid",
        "scale": {"grid": [0.0, 1.0, 2.0, 3.0]},
        "lagrangian": {"kind": "counterexample"},
        "boundary": {"ua": [0.0], "ub": [6.0]},
    }


def _oscillator():
    return {
        "name": "oscillator",
        "scale": {"uniform": {"a": 0.0, "b": 1.0, "n": 101}},
        "lagrangian": QUAD1,
        "boundary": {"ua": [0.0], "ub": [math.sin(1.0)]},
        "mode": "nabla-delta",
        "convergence": {"N": CONV_N, "modes": ["nabla-delta", "delta-delta"]},
        "diagnostics": ["energy"],
    }


def _oscillator_long():
    h = 0.02
    n = int(round(20 * math.pi / h)) + 1
    t1 = 20 * math.pi / (n - 1)
    return {
        "name": "oscillator_long",
        "scale": {"uniform": {"a": 0.0, "b": 20 * math.pi, "n": n}},
        "lagrangian": QUAD1,
        "initial": {"u0": [1.0], "u1": [math.cos(t1)]},
        "diagnostics": ["energy"],
    }


def _free_particle():
    return {
        "name": "free_particle",
        "scale": {"uniform": {"a": 0.0, "b": 1.0, "n": 21}},
        "lagrangian": FREE1,
        "boundary": {"ua": [0.0], "ub": [1.0]},
        "transformation": {"kind": "translation", "direction": [1.0], "eta": 1.0, "thetas": 9},
        "convergence": {"N": CONV_N, "modes": ["nabla-delta", "delta-delta"]},
    }


def _forced():
    return {
        "name": "forced_oscillator",
        "scale": {"uniform": {"a": 0.0, "b": 1.0, "n": 101}},
        "lagrangian": FORCED,
        "boundary": {"ua": [float(_forced_exact(0.0))], "ub": [float(_forced_exact(1.0))]},
        "convergence": {"N": CONV_N, "modes": ["nabla-delta", "delta-delta"]},
    }


def _rotational():
    return {
        "name": "rotational_noether",
        "scale": {"uniform": {"a": 0.0, "b": 1.0, "n": 201}},
        "lagrangian": {"kind": "rotational"},
        "boundary": {"ua": [1.0, 0.0], "ub": [0.3, 0.8]},
        "mode": "nabla-delta",
        "transformation": {"kind": "rotation", "plane": [0, 1], "dim": 2, "eta": math.pi, "thetas": 9},
    }


def _rotational_nonuniform():
    rng = np.random.default_rng(20240501)
    pts = np.concatenate([[0.0], np.cumsum(rng.uniform(0.5, 1.5, 120))])
    pts = pts / pts[-1]
    return {
        "name": "rotational_nonuniform",
        "scale": {"grid": pts.tolist()},
        "lagrangian": {"kind": "rotational"},
        "boundary": {"ua": [1.0, 0.0], "ub": [0.3, 0.8]},
        "transformation": {"kind": "rotation", "plane": [0, 1], "dim": 2, "eta": math.pi, "thetas": 9},
    }


_PRESETS = [
    Preset("ex1_counterexample",
           "L = x + v²/2 on {0} ∪ {1/k!}: integral equation holds, σ^∇ grid values grow like k",
           _ex1, {"integral_residual": 0.0, "fitted_c": 0.0}),
    Preset("ex1_small_grid", "L = x + v²/2 on {0,1,2,3} with the exact critical point u = ∫σ",
           _ex1_small),
    Preset("ex2_1", "[0, 1]: σ continuous", _classify([{"interval": [0.0, 1.0]}], [0.0, 0.5, 1.0]),
           {"sigma_continuous_everywhere": True}),
    Preset("ex2_2", "finite scale: σ continuous",
           _classify([{"points": [0.0, 0.25, 0.5, 1.0, 2.0]}], [0.0, 0.5, 2.0]),
           {"sigma_continuous_everywhere": True}),
    Preset("ex2_3", "{0, 1} ∪ [2, 3]: σ continuous",
           _classify([{"points": [0.0, 1.0]}, {"interval": [2.0, 3.0]}], [1.0, 2.0]),
           {"sigma_continuous_everywhere": True}),
    Preset("ex2_4", "[-1, 0] ∪ {1/k}: σ continuous",
           _classify([{"interval": [-1.0, 0.0]}, _fam("power", exponent=1.0)], [0.0]),
           {"sigma_continuous_everywhere": True}),
    Preset("ex2_5", "[0, 1] ∪ [2, 3]: σ not continuous at 1",
           _classify([{"interval": [0.0, 1.0]}, {"interval": [2.0, 3.0]}], [1.0]),
           {"sigma_continuous_everywhere": False, "discontinuities": [1.0]}),
    Preset("ex3_3", "{0} ∪ {z_k}, z_k = 1/(3^k + 1) decreasing: σ^∇(0) = lim z_{k-1}/z_k = 3",
           _classify([_fam("custom", generator="inv_3pow_plus_1")], [0.0]),
           {"t": 0.0, "sigma_nabla": 3.0}),
    Preset("ex3_4", "{0} ∪ {1/r^k}, r = 2: σ^∇(0) = r",
           _classify([_fam("geometric", ratio=2.0)], [0.0]), {"t": 0.0, "sigma_nabla": 2.0}),
    Preset("ex3_5", "{0} ∪ {z_k}, z_k = -1/(2^k + 1) increasing: σ^∇(0) = lim z_{k+1}/z_k = 1/2",
           _classify([_fam("custom", generator="neg_inv_2pow_plus_1", side="left")], [0.0]),
           {"t": 0.0, "sigma_nabla": 0.5}),
    Preset("ex3_6", "{0} ∪ {-1/r^k}, r = 2: σ^∇(0) = 1/r",
           _classify([_fam("geometric", ratio=2.0, side="left")], [0.0]),
           {"t": 0.0, "sigma_nabla": 0.5}),
    Preset("ex3_7", "[-1, 0] ∪ {1/(k(k+1))}: ratios tend to 1, σ^∇(0) = 1",
           _classify([{"interval": [-1.0, 0.0]},
                      _fam("custom", generator="inv_k_times_k_plus_1", start=1)], [0.0]),
           {"t": 0.0, "sigma_nabla": 1.0}),
    Preset("ex3_8", "[-1, 0] ∪ {1/k²}: σ^∇(0) = 1",
           _classify([{"interval": [-1.0, 0.0]}, _fam("power", exponent=2.0)], [0.0]),
           {"t": 0.0, "sigma_nabla": 1.0}),
    Preset("ex3_9", "{0} ∪ {-1/√k} ∪ {1/(k log(k+1))}: both side ratios tend to 1, σ^∇(0) = 1",
           _classify([_fam("custom", generator="neg_inv_sqrt_k", side="left", start=1),
                      _fam("custom", generator="inv_k_log_k_plus_1", start=1)], [0.0]),
           {"t": 0.0, "sigma_nabla": 1.0}),
    Preset("ex3_10", "{0} ∪ {-1/k} ∪ {1/k²}: σ^∇(0) = 1",
           _classify([_fam("power", exponent=1.0, side="left"), _fam("power", exponent=2.0)], [0.0]),
           {"t": 0.0, "sigma_nabla": 1.0}),
    Preset("ex4_1", "{0} ∪ {1/k!}: σ^∇(0) does not exist, k!/(k-1)! = k diverges",
           _classify([_fam("factorial")], [0.0]), {"t": 0.0, "reason": "ratio-diverges"}),
    Preset("ex4_2", "[-1, 0] ∪ {1/2^k}: σ^∇(0) does not exist, right ratio 2 ≠ 1",
           _classify([{"interval": [-1.0, 0.0]}, _fam("geometric", ratio=2.0)], [0.0]),
           {"t": 0.0, "reason": "left-right-mismatch", "left": 1.0, "right": 2.0}),
    Preset("ex4_3", "{0} ∪ {±1/2^k}: σ^∇(0) does not exist, 1/2 ≠ 2",
           _classify([_fam("geometric", ratio=2.0, side="left"), _fam("geometric", ratio=2.0)], [0.0]),
           {"t": 0.0, "reason": "left-right-mismatch", "left": 0.5, "right": 2.0}),
    Preset("oscillator", "L = v²/2 - x²/2 on [0, 1], N = 101, u(1) = sin 1", _oscillator),
    Preset("oscillator_long", "oscillator integrated over 10 periods with h ≈ 0.02", _oscillator_long),
    Preset("free_particle", "L = v²/2 on [0, 1]; translation symmetry", _free_particle),
    Preset("forced_oscillator", "L = v²/2 - x²/2 + t x; shifted and non-shifted schemes differ", _forced),
    Preset("rotational_noether", "L = |x|² + |v|² with planar rotations, N = 201", _rotational),
    Preset("rotational_nonuniform", "rotational Noether problem on a random non-uniform grid",
           _rotational_nonuniform),
]

PRESETS: dict[str, Preset] = {p.name: p for p in _PRESETS}


def preset_names() -> list[str]:
    return list(PRESETS)


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known presets: {', '.join(PRESETS)}") from None
