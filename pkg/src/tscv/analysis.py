"""Analytic time scales and the regularity of the forward jump operator.

An :class:`AnalyticScale` is an ordered union of closed intervals, finite
point lists and monotone sequences accumulating at a point.  Verdicts on the
continuity and ∇-differentiability of σ are derived from this structure
(limits of generator ratios), never from floating-point samples of a
truncated grid: a finite truncation cannot certify a limit.

Backward quantities (ρ, left density) are computed by reflecting the scale
through the origin, which swaps the roles of σ and ρ exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Sequence, Union

import numpy as np

from .timescale import GridScale, PointClass, TimeScaleError

__all__ = [
    "Interval",
    "PointList",
    "SequenceFamily",
    "AnalyticScale",
    "Reason",
    "RegularityVerdict",
    "RatioLimit",
    "Truncation",
    "classify_point",
    "sigma_continuous_at",
    "rho_continuous_at",
    "sigma_rho_identity",
    "sigma_nabla_at",
    "ratio_limit",
    "quasi_regular",
    "sigma_continuous_everywhere",
    "truncate_to_grid",
]

#: Relative tolerance used to snap a query point onto a sequence term.
MEMBERSHIP_RTOL = 1e-12
#: Relative change between successive ratio estimates that counts as converged.
RATIO_RTOL = 1e-9
#: Growth per doubling that counts as divergence of ratio estimates.
DIVERGENCE_GROWTH = 1.10
#: One-sided σ^∇ limits closer than this (relative) are taken as equal.
SIDE_MATCH_RTOL = 1e-8
DEFAULT_PROBES = 48


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` with ``lo < hi``."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise TimeScaleError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def hull(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def locate(self, t: float) -> float | None:
        return t if self.lo <= t <= self.hi else None

    def inf_above(self, t: float) -> float | None:
        if t < self.lo:
            return self.lo
        if t < self.hi:
            return t
        return None

    def right_dense_at(self, t: float) -> bool:
        return self.lo <= t < self.hi

    def reflected(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def notable(self) -> list[float]:
        return [self.lo, self.hi]

    def approach_from_right(self, t: float, depth: int) -> Iterator[float]:
        if not self.right_dense_at(t):
            return
        width = self.hi - t
        for j in range(2, depth + 2):
            yield t + width * 10.0**-j


@dataclass(frozen=True)
class PointList:
    """Finitely many isolated points."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(sorted(float(v) for v in self.values))
        if not vals:
            raise TimeScaleError("a point list needs at least one point")
        if any(x == y for x, y in zip(vals, vals[1:])):
            raise TimeScaleError("duplicate points in point list")
        object.__setattr__(self, "values", vals)

    @property
    def hull(self) -> tuple[float, float]:
        return (self.values[0], self.values[-1])

    def locate(self, t: float) -> float | None:
        return t if t in self.values else None

    def inf_above(self, t: float) -> float | None:
        for v in self.values:
            if v > t:
                return v
        return None

    def right_dense_at(self, t: float) -> bool:
        return False

    def reflected(self) -> "PointList":
        return PointList(tuple(-v for v in self.values))

    def notable(self) -> list[float]:
        return list(self.values)

    def approach_from_right(self, t: float, depth: int) -> Iterator[float]:
        return iter(())


_DEFAULT_START = {"geometric": 0, "power": 1, "factorial": 1, "custom": 0}


@dataclass(frozen=True)
class SequenceFamily:
    """Terms ``z_k`` accumulating monotonically at ``accumulation_point``, plus that point.

    ``side="right"`` places the terms above the accumulation point
    (decreasing to it), ``side="left"`` below it (increasing to it).  The
    distance of ``z_k`` to the accumulation point is

    - ``geometric``: ``amplitude / ratio**k`` with ``ratio > 1``;
    - ``power``: ``amplitude / k**exponent`` with ``exponent > 0``, ``k >= 1``;
    - ``factorial``: ``amplitude / k!`` (``k >= 1``, since ``0! = 1!``);
    - ``custom``: ``|generator(k) - accumulation_point|`` where ``generator``
      returns the term itself.
    """

    kind: str
    accumulation_point: float = 0.0
    side: str = "right"
    ratio: float | None = None
    exponent: float | None = None
    amplitude: float = 1.0
    start: int | None = None
    generator: Callable[[int], float] | None = field(default=None, compare=False)
    name: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in _DEFAULT_START:
            raise TimeScaleError(f"unknown sequence kind {self.kind!r}")
        if self.side not in ("left", "right"):
            raise TimeScaleError(f"side must be 'left' or 'right', got {self.side!r}")
        if self.kind == "geometric" and not (self.ratio is not None and self.ratio > 1):
            raise TimeScaleError("geometric family needs ratio > 1")
        if self.kind == "power" and not (self.exponent is not None and self.exponent > 0):
            raise TimeScaleError("power family needs exponent > 0")
        if self.kind == "custom" and self.generator is None:
            raise TimeScaleError("custom family needs a generator")
        if not self.amplitude > 0:
            raise TimeScaleError("amplitude must be positive")
        if self.start is None:
            object.__setattr__(self, "start", _DEFAULT_START[self.kind])
        if self.kind in ("power", "factorial") and self.start < 1:
            raise TimeScaleError(f"{self.kind} family starts at k >= 1")

    @property
    def sign(self) -> float:
        return 1.0 if self.side == "right" else -1.0

    def distance(self, k: int) -> float:
        if self.kind == "geometric":
            try:
                return self.amplitude / self.ratio**k
            except OverflowError:
                return 0.0
        if self.kind == "power":
            return self.amplitude / float(k) ** self.exponent
        if self.kind == "factorial":
            return self.amplitude / math.factorial(k) if k < 171 else 0.0
        return abs(float(self.generator(k)) - self.accumulation_point)

    def term(self, k: int) -> float:
        if self.kind == "custom":
            return float(self.generator(k))
        return self.accumulation_point + self.sign * self.distance(k)

    def terms(self, count: int) -> list[float]:
        return [self.term(k) for k in range(self.start, self.start + count)]

    @property
    def hull(self) -> tuple[float, float]:
        first = self.term(self.start)
        acc = self.accumulation_point
        return (acc, first) if self.side == "right" else (first, acc)

    def _first_k(self, pred: Callable[[int], bool]) -> int:
        """Smallest ``k >= start`` with ``pred(k)``; *pred* must be monotone in k."""
        lo = self.start
        if pred(lo):
            return lo
        step = 1
        hi = lo + step
        while not pred(hi):
            lo = hi
            step *= 2
            hi = lo + step
            if step > 2**256:
                raise TimeScaleError("sequence search did not terminate")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if pred(mid):
                hi = mid
            else:
                lo = mid
        return hi

    def locate(self, t: float) -> float | None:
        acc = self.accumulation_point
        if t == acc:
            return acc
        lo, hi = self.hull
        tol = MEMBERSHIP_RTOL * max(1.0, abs(t))
        if not (lo - tol <= t <= hi + tol) or t == acc:
            return None
        gap = abs(t - acc)
        # near the accumulation point the terms are much closer together than
        # the absolute slack, so match relative to the distance instead
        tol = min(tol, MEMBERSHIP_RTOL * gap)
        # for an exact term value the first k with d_k <= gap hits it exactly;
        # slack in the search would land early where the terms are dense
        k = self._first_k(lambda j: self.distance(j) <= gap)
        best = None
        for j in (k - 1, k, k + 1):
            if j >= self.start:
                err = abs(self.term(j) - t)
                if err <= tol and (best is None or err < best[0]):
                    best = (err, self.term(j))
        return None if best is None else best[1]

    def inf_above(self, t: float) -> float | None:
        acc = self.accumulation_point
        if self.side == "right":
            if t <= acc:
                return acc
            if t >= self.term(self.start):
                return None
            # largest k whose term is still above t
            k = self._first_k(lambda j: self.term(j) <= t)
            return self.term(k - 1)
        first = self.term(self.start)
        if t < first:
            return first
        if t >= acc:
            return None
        k = self._first_k(lambda j: self.term(j) > t)
        return self.term(k)

    def right_dense_at(self, t: float) -> bool:
        return self.side == "right" and t == self.accumulation_point

    def reflected(self) -> "SequenceFamily":
        gen = self.generator
        return SequenceFamily(
            kind=self.kind,
            accumulation_point=-self.accumulation_point,
            side="left" if self.side == "right" else "right",
            ratio=self.ratio,
            exponent=self.exponent,
            amplitude=self.amplitude,
            start=self.start,
            generator=(lambda k: -gen(k)) if gen is not None else None,
            name=self.name,
        )

    def notable(self) -> list[float]:
        return [self.accumulation_point, self.term(self.start), self.term(self.start + 1)]

    def approach_from_right(self, t: float, depth: int) -> Iterator[float]:
        if not self.right_dense_at(t):
            return
        first = self.distance(self.start)
        for j in range(2, depth + 2):
            target = first * 10.0**-j
            try:
                k = self._first_k(lambda i: self.distance(i) <= target)
            except TimeScaleError:  # sequence too slow to reach the target distance
                return
            yield self.term(k)


Cell = Union[Interval, PointList, SequenceFamily]


@dataclass(frozen=True)
class AnalyticScale:
    """An ordered union of cells; adjacent cells may share one endpoint only."""

    cells: tuple[Cell, ...]
    name: str | None = None

    def __post_init__(self) -> None:
        cells = tuple(self.cells)
        if not cells:
            raise TimeScaleError("an analytic scale needs at least one cell")
        object.__setattr__(self, "cells", cells)
        for left, right in zip(cells, cells[1:]):
            lhi, rlo = left.hull[1], right.hull[0]
            if lhi > rlo:
                raise TimeScaleError(f"cells overlap or are out of order near {rlo}")
            if lhi == rlo and (left.locate(lhi) is None or right.locate(rlo) is None):
                raise TimeScaleError(f"cells touch at {lhi}, which is not in both")

    @property
    def a(self) -> float:
        return self.cells[0].hull[0]

    @property
    def b(self) -> float:
        return self.cells[-1].hull[1]

    @property
    def extent(self) -> float:
        return self.b - self.a

    def locate(self, t: float) -> float:
        """Canonical float of the point *t* of the scale; raises if *t* is not in it."""
        for cell in self.cells:
            hit = cell.locate(float(t))
            if hit is not None:
                return hit
        raise TimeScaleError(f"{t!r} is not a point of the scale")

    def __contains__(self, t: float) -> bool:
        try:
            self.locate(t)
        except TimeScaleError:
            return False
        return True

    def sigma(self, t: float) -> float:
        t = self.locate(t)
        candidates = [c.inf_above(t) for c in self.cells]
        candidates = [c for c in candidates if c is not None]
        return min(candidates) if candidates else t

    def reflected(self) -> "AnalyticScale":
        return AnalyticScale(tuple(c.reflected() for c in reversed(self.cells)), self.name)

    def rho(self, t: float) -> float:
        return -self.reflected().sigma(-self.locate(t))

    def mu(self, t: float) -> float:
        t = self.locate(t)
        return self.sigma(t) - t

    def nu(self, t: float) -> float:
        t = self.locate(t)
        return t - self.rho(t)

    def notable_points(self) -> list[float]:
        """Points where the density class can change, sorted and de-duplicated.

        Every right-scattered left-dense (or left-scattered right-dense)
        point of the scale is among them.
        """
        pts = {p for c in self.cells for p in c.notable()}
        return sorted(pts)

    def families(self) -> list[SequenceFamily]:
        return [c for c in self.cells if isinstance(c, SequenceFamily)]

    def approach(self, t: float, side: str, depth: int = 8) -> list[float]:
        """Points of the scale tending to *t* from the given side (empty if isolated)."""
        t = self.locate(t)
        if side == "right":
            for cell in self.cells:
                probes = list(cell.approach_from_right(t, depth))
                if probes:
                    return probes
            return []
        return [-s for s in self.reflected().approach(-t, "right", depth)]


class Reason(str, Enum):
    ISOLATED = "isolated"
    RD = "RD"
    LS_CONTINUOUS = "LS-with-continuous-sigma"
    DISCONTINUITY = "RS∩LD-discontinuity"
    RATIO_LIMIT = "ratio-limit-exists"
    RATIO_DIVERGES = "ratio-diverges"
    SIDE_MISMATCH = "left-right-mismatch"
    RATIO_UNDETERMINED = "ratio-undetermined"


@dataclass(frozen=True)
class RegularityVerdict:
    """Continuity and ∇-differentiability of σ at one point.

    ``nabla_differentiable_at`` is ``None`` when only continuity was asked for.
    """

    t: float
    point_class: PointClass
    continuous_at: bool
    nabla_differentiable_at: bool | None
    sigma_nabla_value: float | None
    reason: Reason
    left_limit: float | None = None
    right_limit: float | None = None

    def __post_init__(self) -> None:
        if self.nabla_differentiable_at and not self.continuous_at:
            raise AssertionError("∇-differentiable verdict at a discontinuity")
        if (self.sigma_nabla_value is not None) != bool(self.nabla_differentiable_at):
            raise AssertionError("σ^∇ value must be present exactly when differentiable")

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "class": str(self.point_class),
            "sigma_continuous": self.continuous_at,
            "sigma_nabla_differentiable": self.nabla_differentiable_at,
            "sigma_nabla": self.sigma_nabla_value,
            "reason": self.reason.value,
            "left_limit": self.left_limit,
            "right_limit": self.right_limit,
        }


@dataclass(frozen=True)
class RatioLimit:
    """Limit of ``d_{k-1}/d_k`` for the distances ``d_k`` of a sequence family."""

    value: float | None
    converged: bool
    status: str  # "converged" | "diverged" | "undetermined"
    divergence_rate: float | None = None
    estimates: tuple[tuple[int, float], ...] = ()


def classify_point(scale: AnalyticScale, t: float) -> PointClass:
    t = scale.locate(t)
    return PointClass.from_flags(scale.sigma(t) == t, scale.rho(t) == t)


def sigma_rho_identity(scale: AnalyticScale, t: float) -> bool:
    """Whether ``σ(ρ(t)) == t``."""
    t = scale.locate(t)
    return scale.sigma(scale.rho(t)) == t


def sigma_continuous_at(scale: AnalyticScale, t: float, depth: int = 12) -> RegularityVerdict:
    """Continuity of σ at *t*, checked along sequences of the scale tending to *t*.

    Along each dense side the gap ``|σ(s_j) - σ(t)|`` must vanish: below half
    the graininess when ``t`` is right-scattered, and shrinking by three
    orders of magnitude over the probes otherwise.
    """
    t = scale.locate(t)
    cls = classify_point(scale, t)
    target = scale.sigma(t)
    mu = target - t
    continuous = True
    for side in ("left", "right"):
        probes = scale.approach(t, side, depth)
        if not probes:
            continue
        gaps = [abs(scale.sigma(s) - target) for s in probes]
        if mu > 0:
            continuous &= gaps[-1] < 0.5 * mu
        else:
            continuous &= gaps[-1] <= 1e-3 * gaps[0]
    if not continuous:
        reason = Reason.DISCONTINUITY
    elif cls.right_dense:
        reason = Reason.RD
    else:
        reason = Reason.ISOLATED
    return RegularityVerdict(t, cls, continuous, None, None, reason)


def rho_continuous_at(scale: AnalyticScale, t: float) -> RegularityVerdict:
    """Continuity of ρ at *t*, by reflection of the scale."""
    return sigma_continuous_at(scale.reflected(), -scale.locate(t))


def ratio_limit(family: SequenceFamily, probes: int = DEFAULT_PROBES) -> RatioLimit:
    """``lim d_{k-1}/d_k``: closed form for catalog kinds, estimated for custom ones.

    The custom estimate evaluates the ratio at ``k, 2k, 4k, ...`` (``probes``
    levels).  It converges when two successive estimates agree to
    ``RATIO_RTOL``, diverges when the last three grow by at least 10% per
    doubling, and is otherwise undetermined.
    """
    if probes < 3:
        raise ValueError("ratio_limit needs at least 3 probes")
    if family.kind == "geometric":
        return RatioLimit(float(family.ratio), True, "converged")
    if family.kind == "power":
        return RatioLimit(1.0, True, "converged")
    if family.kind == "factorial":
        return RatioLimit(math.inf, False, "diverged", divergence_rate=1.0)
    return _estimate_ratio(family, probes)


def _estimate_ratio(family: SequenceFamily, probes: int) -> RatioLimit:
    k = max(family.start + 1, 4)
    estimates: list[tuple[int, float]] = []
    for _ in range(probes):
        try:
            d_prev, d = family.distance(k - 1), family.distance(k)
        except (OverflowError, ZeroDivisionError, ValueError):
            break  # the generator cannot be evaluated this far out
        if not (d > 1e-300 and math.isfinite(d_prev)):
            break
        estimates.append((k, d_prev / d))
        if len(estimates) >= 2:
            e0, e1 = estimates[-2][1], estimates[-1][1]
            if abs(e1 - e0) <= RATIO_RTOL * abs(e1):
                return RatioLimit(e1, True, "converged", estimates=tuple(estimates))
        k *= 2
    if len(estimates) >= 3:
        tail = [e for _, e in estimates[-3:]]
        if all(y >= DIVERGENCE_GROWTH * x for x, y in zip(tail, tail[1:])):
            ks = np.log([kk for kk, _ in estimates[-3:]])
            rate = float(np.polyfit(ks, np.log(tail), 1)[0])
            return RatioLimit(
                math.inf, False, "diverged", divergence_rate=rate, estimates=tuple(estimates)
            )
    return RatioLimit(None, False, "undetermined", estimates=tuple(estimates))


def _dense_side_limit(
    scale: AnalyticScale, t: float, probes: int
) -> tuple[float | None, str]:
    """Limit of ``(σ(s) - t)/(s - t)`` for ``s → t+`` in *scale*.

    Returns ``(value, status)`` where status is ``"converged"``,
    ``"diverged"`` or ``"undetermined"``; ``(None, "absent")`` if *t* is not
    right-dense through a cell.
    """
    for cell in scale.cells:
        if isinstance(cell, Interval) and cell.right_dense_at(t):
            return 1.0, "converged"
        if isinstance(cell, SequenceFamily) and cell.right_dense_at(t):
            lim = ratio_limit(cell, probes)
            return lim.value, lim.status
    return None, "absent"


def _left_side_limit(scale: AnalyticScale, t: float, probes: int) -> tuple[float | None, str]:
    # on the mirror scale the right-side ratio is d_{k-1}/d_k; the original left
    # ratio (σ(s) - t)/(s - t) along z_k ↑ t is its reciprocal d_{k+1}/d_k
    value, status = _dense_side_limit(scale.reflected(), -t, probes)
    if value is None:
        return None, status
    return (0.0 if math.isinf(value) else 1.0 / value), (
        "converged" if status in ("converged", "diverged") else status
    )


def sigma_nabla_at(
    scale: AnalyticScale, t: float, probes: int = DEFAULT_PROBES
) -> RegularityVerdict:
    """∇-differentiability of σ at ``t ∈ T_κ`` and the value of ``σ^∇(t)``."""
    t = scale.locate(t)
    cls = classify_point(scale, t)
    if t == scale.a and not cls.right_dense:
        raise TimeScaleError("σ^∇ is only defined on T_κ, which excludes a right-scattered a")
    cont = sigma_continuous_at(scale, t)

    def verdict(ok, value, reason, left=None, right=None):
        return RegularityVerdict(t, cls, cont.continuous_at, ok, value, reason, left, right)

    if not cont.continuous_at:
        return verdict(False, None, Reason.DISCONTINUITY)
    if not cls.left_dense:
        reason = Reason.LS_CONTINUOUS if cls.right_dense else Reason.ISOLATED
        return verdict(True, scale.mu(t) / scale.nu(t), reason)
    # no cell is dense to the left of a, nor to the right of b
    left, lstat = _left_side_limit(scale, t, probes)
    right, rstat = _dense_side_limit(scale, t, probes)
    sides = [(v, st) for v, st in ((left, lstat), (right, rstat)) if st != "absent"]
    if not sides:
        raise AssertionError(f"left-dense point {t} with no dense side")
    if any(st == "diverged" for _, st in sides):
        return verdict(False, None, Reason.RATIO_DIVERGES, left, right)
    if any(st == "undetermined" for _, st in sides):
        return verdict(False, None, Reason.RATIO_UNDETERMINED, left, right)
    if len(sides) == 2 and abs(left - right) > SIDE_MATCH_RTOL * max(1.0, abs(left)):
        return verdict(False, None, Reason.SIDE_MISMATCH, left, right)
    return verdict(True, float(sides[-1][0]), Reason.RATIO_LIMIT, left, right)


def sigma_continuous_everywhere(scale: AnalyticScale) -> bool:
    """σ is continuous on the whole scale (no RS∩LD point other than a)."""
    return all(sigma_continuous_at(scale, t).continuous_at for t in scale.notable_points())


def quasi_regular(scale: AnalyticScale) -> bool:
    """σ and ρ are both continuous on the whole scale."""
    return sigma_continuous_everywhere(scale) and sigma_continuous_everywhere(
        scale.reflected()
    )


@dataclass(frozen=True)
class Truncation:
    """A grid approximating an analytic scale.

    ``accumulation_indices`` maps grid indices to the accumulation points
    they hold exactly; ``family_terms`` maps grid indices of sequence terms to
    ``(family position in the cell list, k)``.
    """

    grid: GridScale
    accumulation_indices: dict[int, float]
    family_terms: dict[int, tuple[int, int]]


def truncate_to_grid(
    scale: AnalyticScale, budget: int, interval_resolution: int = 11
) -> Truncation:
    """Finite grid with at most *budget* points drawn from *scale*.

    Intervals contribute *interval_resolution* uniform samples, point lists
    all their points, sequence families their accumulation point; the rest of
    the budget goes to the first terms of the families, round robin.
    """
    if budget < 3:
        raise TimeScaleError("truncation budget must be at least 3")
    if interval_resolution < 2:
        raise TimeScaleError("interval_resolution must be at least 2")
    mandatory: set[float] = set()
    acc_points: set[float] = set()
    for cell in scale.cells:
        if isinstance(cell, Interval):
            mandatory.update(np.linspace(cell.lo, cell.hi, interval_resolution).tolist())
        elif isinstance(cell, PointList):
            mandatory.update(cell.values)
        else:
            mandatory.add(cell.accumulation_point)
            acc_points.add(cell.accumulation_point)
    if len(mandatory) > budget:
        raise TimeScaleError(
            f"budget {budget} cannot hold the {len(mandatory)} mandatory points"
        )
    points = set(mandatory)
    term_of: dict[float, tuple[int, int]] = {}
    fams = [(i, c) for i, c in enumerate(scale.cells) if isinstance(c, SequenceFamily)]
    next_k = {i: c.start for i, c in fams}
    while fams and len(points) < budget:
        progressed = False
        for i, fam in fams:
            if len(points) >= budget:
                break
            k = next_k[i]
            next_k[i] += 1
            z = fam.term(k)
            if fam.distance(k) <= 0 or z in acc_points:
                continue
            progressed = True
            if z not in points:
                points.add(z)
                term_of[z] = (i, k)
        if not progressed:
            break
    grid = GridScale(np.array(sorted(points)))
    accs = {grid.index_of(p): p for p in acc_points}
    terms = {grid.index_of(z): ik for z, ik in term_of.items()}
    return Truncation(grid, accs, terms)
