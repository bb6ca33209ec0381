"""Analytic scales: point classes, σ-continuity, σ^∇ verdicts, ratio limits, truncation."""

from __future__ import annotations

import math

import numpy as np
import pytest

from tscv.analysis import (
    AnalyticScale,
    Interval,
    PointList,
    Reason,
    SequenceFamily,
    classify_point,
    quasi_regular,
    ratio_limit,
    rho_continuous_at,
    sigma_continuous_at,
    sigma_continuous_everywhere,
    sigma_nabla_at,
    sigma_rho_identity,
    truncate_to_grid,
)
from tscv.cli import classify
from tscv.presets import PRESETS
from tscv.timescale import PointClass, TimeScaleError


def scale(*cells) -> AnalyticScale:
    return AnalyticScale(tuple(cells))


GEO2 = SequenceFamily("geometric", ratio=2.0)
FACT = SequenceFamily("factorial")


# --- point classes ----------------------------------------------------------


def test_classify_point_examples():
    assert classify_point(scale(Interval(0, 1), Interval(2, 3)), 1.0) == PointClass.RS_LD
    assert classify_point(scale(PointList((0.0, 1.0)), Interval(2, 3)), 1.0) == PointClass.RS_LS
    assert classify_point(scale(GEO2), 0.0) == PointClass.RD_LD


def test_membership_error():
    with pytest.raises(TimeScaleError):
        classify_point(scale(Interval(0, 1), Interval(2, 3)), 1.5)
    with pytest.raises(TimeScaleError):
        classify_point(scale(GEO2), 0.3)


def test_sequence_terms_are_members():
    s = scale(GEO2)
    for z in GEO2.terms(30):
        assert z in s
        assert classify_point(s, z) == (PointClass.RD_LS if z == 1.0 else PointClass.RS_LS)


def test_overlapping_cells_rejected():
    with pytest.raises(TimeScaleError):
        scale(Interval(0, 2), Interval(1, 3))


def test_family_parameter_validation():
    with pytest.raises(TimeScaleError):
        SequenceFamily("geometric", ratio=1.0)
    with pytest.raises(TimeScaleError):
        SequenceFamily("power", exponent=0.0)
    with pytest.raises(TimeScaleError):
        SequenceFamily("custom")


# --- continuity of σ --------------------------------------------------------


def test_sigma_continuity_examples():
    assert not sigma_continuous_at(scale(Interval(0, 1), Interval(2, 3)), 1.0).continuous_at
    s = scale(Interval(-1, 0), SequenceFamily("power", exponent=1.0))
    assert all(sigma_continuous_at(s, t).continuous_at for t in s.notable_points())
    assert sigma_continuous_everywhere(s)
    assert sigma_continuous_everywhere(scale(PointList((0.0, 0.3, 2.0, 7.0))))


def test_sigma_continuous_at_right_scattered_a():
    # a ∈ RS ∩ LD by the convention ρ(a) = a, yet σ is continuous at a
    s = scale(PointList((0.0, 1.0)), Interval(2, 3))
    assert classify_point(s, 0.0) == PointClass.RS_LD
    assert sigma_continuous_at(s, 0.0).continuous_at


def test_quasi_regular_examples():
    assert quasi_regular(scale(PointList((0.0, 1.0, 2.5))))
    assert not quasi_regular(scale(Interval(0, 1), Interval(2, 3)))
    assert quasi_regular(scale(Interval(0, 1)))


def test_rho_continuity_mirror():
    # ρ jumps at 2 (left-scattered, right-dense)
    s = scale(Interval(0, 1), Interval(2, 3))
    assert not rho_continuous_at(s, 2.0).continuous_at
    assert rho_continuous_at(s, 1.0).continuous_at


def _random_scale(rng: np.random.Generator) -> AnalyticScale:
    cells = []
    for i in range(int(rng.integers(1, 4))):
        lo = 3.0 * i
        kind = rng.choice(["interval", "points", "family"])
        if kind == "interval":
            cells.append(Interval(lo, lo + float(rng.uniform(0.5, 2.0))))
        elif kind == "points":
            cells.append(PointList(tuple(sorted(lo + rng.choice(20, int(rng.integers(1, 4)), replace=False) / 10))))
        else:
            fam = rng.choice(["geometric", "power", "factorial"])
            side = str(rng.choice(["left", "right"]))
            acc = lo if side == "right" else lo + 2.0
            kw = {"ratio": float(rng.uniform(1.5, 4.0))} if fam == "geometric" else {}
            if fam == "power":
                kw = {"exponent": float(rng.uniform(0.5, 3.0))}
            cells.append(SequenceFamily(str(fam), accumulation_point=acc, side=side, amplitude=1.5, **kw))
    return AnalyticScale(tuple(cells))


def _sample_points(s: AnalyticScale, rng) -> list[float]:
    pts = set(s.notable_points())
    for c in s.cells:
        if isinstance(c, Interval):
            pts.add(float(rng.uniform(c.lo, c.hi)))
        elif isinstance(c, SequenceFamily):
            pts.update(c.terms(4))
    return sorted(pts)


def test_continuity_equivalence_chain_random():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(200):
        s = _random_scale(rng)
        for t in _sample_points(s, rng):
            cls = classify_point(s, t)
            if t == s.a and not cls.right_dense:
                continue  # not in T_κ
            cont = sigma_continuous_at(s, t).continuous_at
            assert cont == sigma_rho_identity(s, t) == (cls != PointClass.RS_LD), (s, t)
            checked += 1
    assert checked > 500


# --- σ^∇ --------------------------------------------------------------------


def test_sigma_nabla_examples():
    v = sigma_nabla_at(scale(GEO2), 0.0)
    assert v.nabla_differentiable_at and v.sigma_nabla_value == 2.0
    v = sigma_nabla_at(scale(FACT), 0.0)
    assert not v.nabla_differentiable_at and v.reason is Reason.RATIO_DIVERGES
    v = sigma_nabla_at(scale(Interval(-1, 0), GEO2), 0.0)
    assert v.reason is Reason.SIDE_MISMATCH and (v.left_limit, v.right_limit) == (1.0, 2.0)


def test_sigma_nabla_at_isolated_point_is_mu_over_nu():
    s = scale(PointList((0.0, 1.0, 3.0, 3.5)))
    v = sigma_nabla_at(s, 1.0)
    assert v.reason is Reason.ISOLATED and v.sigma_nabla_value == 2.0


def test_sigma_nabla_refuses_right_scattered_a():
    with pytest.raises(TimeScaleError):
        sigma_nabla_at(scale(PointList((0.0, 1.0, 2.0))), 0.0)


def test_sigma_nabla_discontinuity_reason():
    v = sigma_nabla_at(scale(Interval(0, 1), Interval(2, 3)), 1.0)
    assert not v.continuous_at and v.reason is Reason.DISCONTINUITY


def test_verdict_invariants_over_presets():
    for p in PRESETS.values():
        cfg = p.config()
        if cfg.scale.kind != "cells":
            continue
        s = cfg.scale.analytic()
        for t in s.notable_points():
            try:
                v = sigma_nabla_at(s, t)
            except TimeScaleError:
                continue
            assert not v.nabla_differentiable_at or v.continuous_at
            assert (v.sigma_nabla_value is not None) == bool(v.nabla_differentiable_at)


def test_ls_points_match_truncated_grid_exactly():
    s = scale(Interval(-1, 0), SequenceFamily("power", exponent=2.0))
    g = truncate_to_grid(s, 30, 5).grid
    checked = 0
    for idx in range(1, len(g) - 1):
        t = float(g.points[idx])
        # only points whose grid neighbours are their neighbours in the scale
        if classify_point(s, t) != PointClass.RS_LS or (g.sigma(idx), g.rho(idx)) != (s.sigma(t), s.rho(t)):
            continue
        assert sigma_nabla_at(s, t).sigma_nabla_value == g.sigma_nabla(idx)
        checked += 1
    assert checked >= 20


# --- ratio limits -----------------------------------------------------------


def test_ratio_limit_examples():
    r = ratio_limit(SequenceFamily("geometric", ratio=3.0))
    assert r.converged and r.value == 3.0
    r = ratio_limit(SequenceFamily("power", exponent=2.0))
    assert r.converged and r.value == 1.0
    r = ratio_limit(FACT)
    assert not r.converged and r.status == "diverged" and r.divergence_rate == 1.0


def test_ratio_limit_needs_three_probes():
    with pytest.raises(ValueError):
        ratio_limit(GEO2, probes=2)


@pytest.mark.parametrize("r", [1.5, 2.0, 3.0, 7.5])
def test_custom_estimator_reproduces_geometric(r):
    geo = SequenceFamily("geometric", ratio=r)
    custom = SequenceFamily("custom", generator=geo.term)
    est = ratio_limit(custom)
    assert est.converged and abs(est.value - r) <= 1e-9 * r


def test_custom_estimator_detects_divergence():
    custom = SequenceFamily("custom", generator=lambda k: 1.0 / math.gamma(k + 1.0), start=1)
    assert ratio_limit(custom).status == "diverged"


def test_custom_estimator_undetermined():
    # d_{k-1}/d_k ≈ 2 exp((sin log k + cos log k)/2) keeps oscillating in log k
    def gen(k):
        return 2.0**-k * math.exp(0.5 * k * math.sin(math.log(k)))

    est = ratio_limit(SequenceFamily("custom", generator=gen, start=1))
    assert est.status == "undetermined" and not est.converged and est.value is None


def test_two_sided_differentiable_points_have_unit_value():
    pairs = [
        (SequenceFamily("power", exponent=1.0, side="left"), SequenceFamily("power", exponent=2.0)),
        (SequenceFamily("geometric", ratio=2.0, side="left"), SequenceFamily("geometric", ratio=2.0)),
        (SequenceFamily("geometric", ratio=3.0, side="left"), SequenceFamily("power", exponent=1.0)),
    ]
    for left, right in pairs:
        v = sigma_nabla_at(scale(left, right), 0.0)
        if v.nabla_differentiable_at:
            assert abs(v.sigma_nabla_value - 1.0) <= 1e-9


# --- presets (every classification fixture) ---------------------------------

CLASSIFICATION_PRESETS = sorted(n for n in PRESETS if n[:4] in ("ex2_", "ex3_", "ex4_"))


def test_all_classification_fixtures_present():
    assert len(CLASSIFICATION_PRESETS) == 16


@pytest.mark.parametrize("name", CLASSIFICATION_PRESETS)
def test_classification_fixture(name):
    p = PRESETS[name]
    rep = classify(p.config())
    exp = p.expect
    if "sigma_continuous_everywhere" in exp:
        assert rep["sigma_continuous_everywhere"] is exp["sigma_continuous_everywhere"]
        disc = [r["t"] for r in rep["points"] if not r["sigma_continuous"]]
        assert disc == exp.get("discontinuities", [])
        return
    rec = next(r for r in rep["points"] if r["t"] == exp["t"])
    if "sigma_nabla" in exp:
        assert rec["sigma_nabla_differentiable"] is True
        assert abs(rec["sigma_nabla"] - exp["sigma_nabla"]) <= 1e-8
    else:
        assert rec["sigma_continuous"] is True
        assert rec["sigma_nabla_differentiable"] is False
        assert rec["reason"] == exp["reason"]
        if "left" in exp:
            assert (rec["left_limit"], rec["right_limit"]) == (exp["left"], exp["right"])


# --- truncation -------------------------------------------------------------


def test_truncation_examples():
    tr = truncate_to_grid(scale(GEO2), 7)
    np.testing.assert_array_equal(tr.grid.points, [0, 1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2, 1])
    assert tr.accumulation_indices == {0: 0.0}
    tr = truncate_to_grid(scale(Interval(0, 1)), 5, 5)
    np.testing.assert_array_equal(tr.grid.points, [0, 0.25, 0.5, 0.75, 1])
    tr = truncate_to_grid(scale(Interval(-1, 0), SequenceFamily("power", exponent=2.0)), 20, 5)
    pts = tr.grid.points
    assert np.all(np.diff(pts) > 0) and np.count_nonzero(pts == 0.0) == 1 and len(pts) == 20


def test_truncation_budget_errors():
    with pytest.raises(TimeScaleError):
        truncate_to_grid(scale(GEO2), 2)
    with pytest.raises(TimeScaleError):
        truncate_to_grid(scale(Interval(0, 1)), 4, 5)


def test_factorial_truncation_terms():
    tr = truncate_to_grid(scale(FACT), 13)
    assert len(tr.grid) == 13
    ks = sorted(k for _, k in tr.family_terms.values())
    assert ks == list(range(1, 13))
