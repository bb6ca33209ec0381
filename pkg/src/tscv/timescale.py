"""Finite time scales: jump operators, graininess, Δ/∇ derivatives and integrals.

A bounded time scale is represented by a strictly increasing grid of at least
three points.  Every point of a finite scale is isolated, so the delta
derivative is a forward difference on ``T^κ = {t_0, ..., t_{N-2}}`` and the
nabla derivative a backward difference on ``T_κ = {t_1, ..., t_{N-1}}``.
Functions living on a sub-domain keep track of it through an index offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "GridScale",
    "GridFunction",
    "PointClass",
    "TimeScaleError",
    "delta_derivative",
    "nabla_derivative",
    "delta_integral",
    "nabla_integral",
    "delta_antiderivative",
    "shift_forward",
    "shift_backward",
    "integration_by_parts_defect",
    "compensated_cumsum",
]

#: Minimum adjacent spacing, relative to ``|b - a|``, in units of machine epsilon.
SPACING_GUARD = 1e3


class TimeScaleError(ValueError):
    """Invalid time scale, index or grid function."""


class PointClass(Enum):
    """Right/left density class of a point of a time scale."""

    RD_LD = ("RD", "LD")
    RD_LS = ("RD", "LS")
    RS_LD = ("RS", "LD")
    RS_LS = ("RS", "LS")

    @classmethod
    def from_flags(cls, right_dense: bool, left_dense: bool) -> "PointClass":
        return cls(("RD" if right_dense else "RS", "LD" if left_dense else "LS"))

    @property
    def right_dense(self) -> bool:
        return self.value[0] == "RD"

    @property
    def left_dense(self) -> bool:
        return self.value[1] == "LD"

    def __str__(self) -> str:
        return f"{self.value[0]}∩{self.value[1]}"


def compensated_cumsum(terms: np.ndarray) -> np.ndarray:
    """Prefix sums of the rows of *terms* with Neumaier compensation.

    Returns an array with one more row than *terms*; row ``k`` holds the sum
    of the first ``k`` rows, so row 0 is zero.
    """
    terms = np.asarray(terms, dtype=float)
    out = np.zeros((terms.shape[0] + 1,) + terms.shape[1:])
    s = np.zeros(terms.shape[1:])
    c = np.zeros(terms.shape[1:])
    for k in range(terms.shape[0]):
        x = terms[k]
        t = s + x
        big = np.abs(s) >= np.abs(x)
        c = c + np.where(big, (s - t) + x, (x - t) + s)
        s = t
        out[k + 1] = s + c
    return out


def _compensated_sum(terms: np.ndarray) -> np.ndarray:
    terms = np.asarray(terms, dtype=float)
    if terms.shape[0] == 0:
        return np.zeros(terms.shape[1:])
    if terms.ndim == 1:
        return np.array(math.fsum(terms))
    flat = terms.reshape(terms.shape[0], -1)
    return np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])]).reshape(
        terms.shape[1:]
    )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridScale:
    """A bounded time scale given by finitely many strictly increasing points."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size < 3:
            raise TimeScaleError(f"a time scale needs at least 3 points, got {pts.size}")
        if not np.all(np.isfinite(pts)):
            raise TimeScaleError("time scale points must be finite")
        gaps = np.diff(pts)
        if np.any(gaps <= 0):
            raise TimeScaleError("time scale points must be strictly increasing")
        guard = SPACING_GUARD * np.finfo(float).eps * (pts[-1] - pts[0])
        if gaps.min() < guard:
            k = int(np.argmin(gaps))
            raise TimeScaleError(
                f"points {pts[k]!r} and {pts[k + 1]!r} are closer than {guard:.3g}"
            )
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "GridScale":
        return cls(np.linspace(a, b, n))

    @classmethod
    def from_text(cls, text: str) -> "GridScale":
        """Parse one float per line; blank lines and ``#`` comments are ignored."""
        values = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise TimeScaleError(f"line {lineno}: not a number: {line!r}") from None
        return cls(np.array(values))

    def to_text(self) -> str:
        return "".join(f"{float(t)!r}\n" for t in self.points)

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridScale):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(
            np.all(self.points == other.points)
        )

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    def __repr__(self) -> str:
        return f"GridScale(N={len(self)}, a={self.a!r}, b={self.b!r})"

    @property
    def a(self) -> float:
        return float(self.points[0])

    @property
    def b(self) -> float:
        return float(self.points[-1])

    def _check(self, k: int) -> int:
        n = len(self)
        if not isinstance(k, (int, np.integer)) or not 0 <= k < n:
            raise TimeScaleError(f"index {k!r} out of range for a scale of {n} points")
        return int(k)

    def index_of(self, t: float) -> int:
        k = int(np.searchsorted(self.points, t))
        if k >= len(self) or self.points[k] != t:
            raise TimeScaleError(f"{t!r} is not a point of the scale")
        return k

    def sigma(self, k: int) -> float:
        k = self._check(k)
        return float(self.points[min(k + 1, len(self) - 1)])

    def rho(self, k: int) -> float:
        k = self._check(k)
        return float(self.points[max(k - 1, 0)])

    def mu(self, k: int) -> float:
        k = self._check(k)
        return self.sigma(k) - float(self.points[k])

    def nu(self, k: int) -> float:
        k = self._check(k)
        return float(self.points[k]) - self.rho(k)

    def sigma_nabla(self, k: int) -> float:
        """∇-derivative of σ at ``t_k`` for ``k`` in ``T_κ``, i.e. ``μ/ν``."""
        k = self._check(k)
        if k == 0:
            raise TimeScaleError("σ^∇ is defined on T_κ only (k ≥ 1)")
        return self.mu(k) / self.nu(k)

    def rho_delta(self, k: int) -> float:
        """Δ-derivative of ρ at ``t_k`` for ``k`` in ``T^κ``, i.e. ``ν/μ``."""
        k = self._check(k)
        if k == len(self) - 1:
            raise TimeScaleError("ρ^Δ is defined on T^κ only (k ≤ N-2)")
        return self.nu(k) / self.mu(k)

    def point_class(self, k: int) -> PointClass:
        k = self._check(k)
        return PointClass.from_flags(self.mu(k) == 0.0, self.nu(k) == 0.0)

    @property
    def sigmas(self) -> np.ndarray:
        return np.append(self.points[1:], self.points[-1])

    @property
    def rhos(self) -> np.ndarray:
        return np.insert(self.points[:-1], 0, self.points[0])

    @property
    def mus(self) -> np.ndarray:
        """Graininess at every point (last entry is 0)."""
        return np.append(np.diff(self.points), 0.0)

    @property
    def nus(self) -> np.ndarray:
        """Backward graininess at every point (first entry is 0)."""
        return np.insert(np.diff(self.points), 0, 0.0)

    @property
    def sigma_nablas(self) -> np.ndarray:
        """``μ/ν`` on ``T_κ`` (indices 1..N-1)."""
        return self.mus[1:] / self.nus[1:]

    def reversed(self) -> "GridScale":
        """The mirror scale ``{-t : t ∈ T}``."""
        return GridScale(-self.points[::-1])


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples ``u(t_k) ∈ R^n`` on the consecutive indices ``offset, offset+1, ...``.

    A function on the whole scale has ``offset == 0`` and ``N`` rows; the
    output of :func:`delta_derivative` has ``N - 1`` rows starting at 0 and
    that of :func:`nabla_derivative` ``N - 1`` rows starting at 1.
    """

    scale: GridScale
    values: np.ndarray
    offset: int = 0

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[1] < 1:
            raise TimeScaleError(f"values must be an (m, n) array, got shape {vals.shape}")
        if self.offset < 0 or self.offset + vals.shape[0] > len(self.scale):
            raise TimeScaleError(
                f"{vals.shape[0]} rows at offset {self.offset} do not fit a scale of "
                f"{len(self.scale)} points"
            )
        if vals.shape[0] == 0:
            raise TimeScaleError("a grid function needs at least one value")
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "offset", int(self.offset))

    @classmethod
    def from_callable(
        cls, scale: GridScale, f: Callable[[float], float | Sequence[float]]
    ) -> "GridFunction":
        return cls(scale, np.array([np.atleast_1d(f(float(t))) for t in scale.points]))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def indices(self) -> range:
        return range(self.offset, self.offset + self.values.shape[0])

    @property
    def times(self) -> np.ndarray:
        return self.scale.points[self.offset : self.offset + self.values.shape[0]]

    @property
    def is_full(self) -> bool:
        return self.offset == 0 and self.values.shape[0] == len(self.scale)

    def __len__(self) -> int:
        return self.values.shape[0]

    def at(self, k: int) -> np.ndarray:
        """Value at absolute scale index *k*."""
        if k not in self.indices:
            raise TimeScaleError(f"index {k} outside the domain {self.indices}")
        return self.values[k - self.offset]

    def scalar(self) -> np.ndarray:
        if self.dim != 1:
            raise TimeScaleError(f"expected a scalar function, got dimension {self.dim}")
        return self.values[:, 0]

    def restrict(self, start: int, stop: int) -> "GridFunction":
        """Restriction to absolute indices ``start..stop-1``."""
        if start < self.offset or stop > self.offset + len(self) or start >= stop:
            raise TimeScaleError(f"cannot restrict {self.indices} to [{start}, {stop})")
        return GridFunction(
            self.scale, self.values[start - self.offset : stop - self.offset], start
        )

    def map(self, f: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return GridFunction(self.scale, np.array([f(row) for row in self.values]), self.offset)

    def _combine(self, other: "GridFunction", op) -> "GridFunction":
        if other.scale != self.scale or other.indices != self.indices:
            raise TimeScaleError("grid functions live on different domains")
        return GridFunction(self.scale, op(self.values, other.values), self.offset)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return self._combine(other, np.add)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self._combine(other, np.subtract)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.scale, self.values * c, self.offset)

    __rmul__ = __mul__

    def dot(self, other: "GridFunction") -> "GridFunction":
        """Pointwise Euclidean inner product (a scalar grid function)."""
        return self._combine(other, lambda x, y: np.sum(x * y, axis=1))

    def to_csv(self, names: Iterable[str] | None = None) -> str:
        names = list(names) if names is not None else [f"u_{i + 1}" for i in range(self.dim)]
        lines = [",".join(["t", *names])]
        for t, row in zip(self.times, self.values):
            lines.append(",".join(repr(float(x)) for x in (t, *row)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, scale: GridScale | None = None) -> "GridFunction":
        rows = [line.split(",") for line in text.strip().splitlines()]
        header = [h.strip() for h in rows[0]]
        if header[0] != "t":
            raise TimeScaleError(f"first CSV column must be 't', got {header[0]!r}")
        data = np.array([[float(x) for x in r] for r in rows[1:]])
        times = data[:, 0]
        if scale is None:
            return cls(GridScale(times), data[:, 1:])
        offset = scale.index_of(float(times[0]))
        if not np.array_equal(scale.points[offset : offset + len(times)], times):
            raise TimeScaleError("CSV times do not match the scale")
        return cls(scale, data[:, 1:], offset)


def _require_full(u: GridFunction, what: str) -> None:
    if not u.is_full:
        raise TimeScaleError(f"{what} needs a function defined on the whole scale")


def delta_derivative(u: GridFunction) -> GridFunction:
    """``u^Δ(t_k) = (u(t_{k+1}) - u(t_k)) / μ(t_k)`` on ``T^κ``.

    A function given on a contiguous sub-domain is differentiated wherever
    both ``t_k`` and ``t_{k+1}`` belong to it.
    """
    if len(u) < 2:
        raise TimeScaleError("delta_derivative needs at least two consecutive values")
    h = np.diff(u.times)[:, None]
    return GridFunction(u.scale, np.diff(u.values, axis=0) / h, u.offset)


def nabla_derivative(u: GridFunction) -> GridFunction:
    """``u^∇(t_k) = (u(t_k) - u(t_{k-1})) / ν(t_k)`` on ``T_κ``, same sub-domain rule."""
    if len(u) < 2:
        raise TimeScaleError("nabla_derivative needs at least two consecutive values")
    h = np.diff(u.times)[:, None]
    return GridFunction(u.scale, np.diff(u.values, axis=0) / h, u.offset + 1)


def delta_integral(f: GridFunction, start: int, stop: int) -> np.ndarray:
    """Cauchy Δ-integral ``∫_{t_start}^{t_stop} f Δτ = Σ_{k=start}^{stop-1} μ_k f(t_k)``."""
    scale = f.scale
    scale._check(start)
    scale._check(stop)
    if start > stop:
        raise TimeScaleError(f"integration bounds reversed: {start} > {stop}")
    if start == stop:
        return np.zeros(f.dim)
    ks = range(start, stop)
    terms = np.array([scale.mu(k) * f.at(k) for k in ks])
    return _compensated_sum(terms)


def nabla_integral(f: GridFunction, start: int, stop: int) -> np.ndarray:
    """Cauchy ∇-integral ``Σ_{k=start+1}^{stop} ν_k f(t_k)``."""
    scale = f.scale
    scale._check(start)
    scale._check(stop)
    if start > stop:
        raise TimeScaleError(f"integration bounds reversed: {start} > {stop}")
    if start == stop:
        return np.zeros(f.dim)
    terms = np.array([scale.nu(k) * f.at(k) for k in range(start + 1, stop + 1)])
    return _compensated_sum(terms)


def delta_antiderivative(f: GridFunction) -> GridFunction:
    """``U(t) = ∫_a^t f Δτ`` for every ``t`` of the scale; needs *f* on ``T^κ``."""
    n = len(f.scale)
    if f.offset != 0 or len(f) < n - 1:
        raise TimeScaleError("delta_antiderivative needs f on T^κ (indices 0..N-2)")
    mus = np.diff(f.scale.points)[:, None]
    return GridFunction(f.scale, compensated_cumsum(mus * f.values[: n - 1]), 0)


def shift_forward(u: GridFunction) -> GridFunction:
    """``u^σ = u ∘ σ`` with ``σ(b) = b``."""
    _require_full(u, "shift_forward")
    return GridFunction(u.scale, np.vstack([u.values[1:], u.values[-1:]]), 0)


def shift_backward(u: GridFunction) -> GridFunction:
    """``u^ρ = u ∘ ρ`` with ``ρ(a) = a``."""
    _require_full(u, "shift_backward")
    return GridFunction(u.scale, np.vstack([u.values[:1], u.values[:-1]]), 0)


def integration_by_parts_defect(
    u: GridFunction, v: GridFunction, relative: bool = False
) -> float:
    """LHS minus RHS of ``∫ u v^Δ = u(b)v(b) - u(a)v(a) - ∫ u^Δ v^σ``.

    With ``relative=True`` the defect is divided by the sum of the absolute
    values of all terms entering either side.
    """
    if u.scale != v.scale:
        raise TimeScaleError("u and v live on different scales")
    if u.dim != 1 or v.dim != 1:
        raise TimeScaleError("integration by parts is implemented for scalar functions")
    _require_full(u, "integration_by_parts_defect")
    _require_full(v, "integration_by_parts_defect")
    n = len(u.scale)
    uu, vv = u.scalar(), v.scalar()
    mus = np.diff(u.scale.points)
    lhs_terms = mus * uu[:-1] * delta_derivative(v).scalar()
    rhs_terms = mus * delta_derivative(u).scalar() * shift_forward(v).scalar()[: n - 1]
    boundary = np.array([uu[-1] * vv[-1], -uu[0] * vv[0]])
    defect = math.fsum(np.concatenate([lhs_terms, -boundary, rhs_terms]))
    if not relative:
        return defect
    magnitude = math.fsum(np.abs(np.concatenate([lhs_terms, boundary, rhs_terms])))
    return defect / magnitude if magnitude > 0 else defect
