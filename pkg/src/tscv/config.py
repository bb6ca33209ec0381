"""Problem files: a single YAML document with nested sections.

Example::

    name: oscillator
    scale:
      uniform: {a: 0.0, b: 1.0, n: 101}
    lagrangian: {kind: quadratic, M: [[1.0]], K: [[1.0]], c: [0.0]}
    boundary: {ua: [0.0], ub: [0.8414709848078965]}
    mode: nabla-delta
    solver: {newton_tol: 1.0e-12, max_iters: 50}

The ``scale`` section holds exactly one of ``grid`` (explicit points),
``uniform`` (``a``, ``b``, ``n``) or ``cells`` (an analytic scale: a list of
``interval``/``points``/``family`` cells, truncated with ``budget`` and
``interval_resolution`` when a grid is needed).  Unknown keys are rejected
with the line and column where they appear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np
import yaml

from . import lagrangians as lag
from .analysis import AnalyticScale, Interval, PointList, SequenceFamily, truncate_to_grid
from .noether import TransformationFamily
from .solver import Mode, SolverOptions
from .timescale import GridScale, TimeScaleError

__all__ = [
    "ConfigError",
    "ScaleConfig",
    "TransformationConfig",
    "ConvergenceConfig",
    "ProblemConfig",
    "GENERATORS",
    "parse_config",
    "load_config",
    "dump_config",
]


class ConfigError(ValueError):
    """Invalid problem file; carries the 1-based line and column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.column = column


#: Named term generators for ``custom`` sequence families.
GENERATORS: dict[str, Callable[[int], float]] = {
    "inv_3pow_plus_1": lambda k: 1.0 / (3.0**k + 1.0),
    "neg_inv_2pow_plus_1": lambda k: -1.0 / (2.0**k + 1.0),
    "inv_k_times_k_plus_1": lambda k: 1.0 / (k * (k + 1.0)),
    "neg_inv_sqrt_k": lambda k: -1.0 / math.sqrt(k),
    "inv_k_log_k_plus_1": lambda k: 1.0 / (k * math.log(k + 1.0)),
}


# ---------------------------------------------------------------------------
# YAML position tracking


class _Marks:
    """Map from key paths to (line, column) of the corresponding YAML node."""

    def __init__(self, text: str):
        self.pos: dict[tuple, tuple[int, int]] = {}
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError:
            node = None
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.pos[path] = (node.start_mark.line + 1, node.start_mark.column + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value
                self.pos[path + (key, "__key__")] = (k.start_mark.line + 1, k.start_mark.column + 1)
                self._walk(v, path + (key,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def error(self, path: tuple, message: str, key: bool = False) -> ConfigError:
        probe = path + ("__key__",) if key else path
        while probe and probe not in self.pos:
            probe = probe[:-1]
        line, col = self.pos.get(probe, (None, None))
        dotted = ".".join(str(p) for p in path) or "<document>"
        return ConfigError(f"{dotted}: {message}", line, col)


_NO_MARKS = _Marks("")


class _Reader:
    def __init__(self, marks: _Marks):
        self.m = marks

    def mapping(self, obj, path, allowed, required=()):
        if not isinstance(obj, dict):
            raise self.m.error(path, f"expected a mapping, got {type(obj).__name__}")
        for k in obj:
            if k not in allowed:
                raise self.m.error(path + (k,), f"unknown key (allowed: {sorted(allowed)})", key=True)
        for k in required:
            if k not in obj:
                raise self.m.error(path, f"missing required key {k!r}")
        return obj

    def number(self, obj, path, positive=False, integer=False):
        if isinstance(obj, str):
            # YAML 1.1 reads exponent literals without a dot ("1e-12") as strings
            try:
                obj = float(obj)
            except ValueError:
                pass
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            raise self.m.error(path, f"expected a number, got {obj!r}")
        if integer and not (isinstance(obj, int) or float(obj).is_integer()):
            raise self.m.error(path, f"expected an integer, got {obj!r}")
        val = int(obj) if integer else float(obj)
        if not math.isfinite(val):
            raise self.m.error(path, "expected a finite number")
        if positive and val <= 0:
            raise self.m.error(path, f"expected a positive number, got {obj!r}")
        return val

    def vector(self, obj, path, length=None):
        if isinstance(obj, (int, float)) and not isinstance(obj, bool):
            obj = [obj]
        if not isinstance(obj, list) or not obj:
            raise self.m.error(path, "expected a non-empty list of numbers")
        vals = [self.number(x, path + (i,)) for i, x in enumerate(obj)]
        if length is not None and len(vals) != length:
            raise self.m.error(path, f"expected {length} components, got {len(vals)}")
        return vals

    def choice(self, obj, path, options):
        if obj not in options:
            raise self.m.error(path, f"expected one of {sorted(options)}, got {obj!r}")
        return obj


# ---------------------------------------------------------------------------
# Sections


_FAMILY_KEYS = {"kind", "accumulation_point", "side", "ratio", "exponent", "amplitude", "start", "generator"}


@dataclass(frozen=True)
class ScaleConfig:
    """``kind`` is ``"grid"``, ``"uniform"`` or ``"cells"``; ``data`` the normalized payload."""

    kind: str
    data: Any
    budget: int = 40
    interval_resolution: int = 11
    probes: int = 48

    def analytic(self) -> AnalyticScale:
        """The scale as a union of cells (finite grids become one point list)."""
        if self.kind == "cells":
            return AnalyticScale(tuple(_build_cell(c) for c in self.data))
        return AnalyticScale((PointList(tuple(self.grid().points.tolist())),))

    def grid(self) -> GridScale:
        if self.kind == "grid":
            return GridScale(np.array(self.data, dtype=float))
        if self.kind == "uniform":
            return GridScale.uniform(self.data["a"], self.data["b"], self.data["n"])
        return truncate_to_grid(self.analytic(), self.budget, self.interval_resolution).grid

    def to_dict(self) -> dict:
        if self.kind == "grid":
            return {"grid": list(self.data)}
        if self.kind == "uniform":
            return {"uniform": dict(self.data)}
        return {
            "cells": [dict(c) for c in self.data],
            "budget": self.budget,
            "interval_resolution": self.interval_resolution,
            "probes": self.probes,
        }


def _build_cell(c: dict):
    if "interval" in c:
        lo, hi = c["interval"]
        return Interval(lo, hi)
    if "points" in c:
        return PointList(tuple(c["points"]))
    f = dict(c["family"])
    gen = f.pop("generator", None)
    return SequenceFamily(generator=GENERATORS[gen] if gen else None, name=gen, **f)


@dataclass(frozen=True)
class TransformationConfig:
    kind: str
    params: dict
    eta: float = 1.0
    thetas: int = 9
    tol: float | None = None

    def family(self) -> TransformationFamily:
        return TransformationFamily(self.kind, self.params, self.eta)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, **{k: _plain(v) for k, v in self.params.items()}}
        out.update(eta=self.eta, thetas=self.thetas)
        if self.tol is not None:
            out["tol"] = self.tol
        return out


@dataclass(frozen=True)
class ConvergenceConfig:
    N: tuple[int, ...]
    modes: tuple[Mode, ...] = (Mode.NONSHIFTED_NABLA_DELTA,)

    def to_dict(self) -> dict:
        return {"N": list(self.N), "modes": [m.flag for m in self.modes]}


@dataclass(frozen=True)
class ProblemConfig:
    scale: ScaleConfig
    lagrangian: dict | None = None
    name: str | None = None
    boundary: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    initial: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    mode: Mode = Mode.NONSHIFTED_NABLA_DELTA
    newton_tol: float = 1e-12
    max_iters: int = 50
    transformation: TransformationConfig | None = None
    convergence: ConvergenceConfig | None = None
    diagnostics: tuple[str, ...] = ()
    points_of_interest: tuple[float, ...] = field(default=())

    def build_lagrangian(self) -> lag.Lagrangian:
        if self.lagrangian is None:
            raise ConfigError("this command needs a 'lagrangian' section")
        return lag.from_dict(self.lagrangian)

    def solver_options(self, **kw) -> SolverOptions:
        return SolverOptions(newton_tol=self.newton_tol, max_iters=self.max_iters, **kw)

    def with_mode(self, mode: Mode | str) -> "ProblemConfig":
        return replace(self, mode=Mode.parse(mode))

    def to_dict(self) -> dict:
        out: dict = {}
        if self.name is not None:
            out["name"] = self.name
        out["scale"] = self.scale.to_dict()
        if self.points_of_interest:
            out["points_of_interest"] = list(self.points_of_interest)
        if self.lagrangian is not None:
            out["lagrangian"] = _plain(self.lagrangian)
        if self.boundary is not None:
            out["boundary"] = {"ua": list(self.boundary[0]), "ub": list(self.boundary[1])}
        if self.initial is not None:
            out["initial"] = {"u0": list(self.initial[0]), "u1": list(self.initial[1])}
        out["mode"] = self.mode.flag
        out["solver"] = {"newton_tol": self.newton_tol, "max_iters": self.max_iters}
        if self.transformation is not None:
            out["transformation"] = self.transformation.to_dict()
        if self.convergence is not None:
            out["convergence"] = self.convergence.to_dict()
        if self.diagnostics:
            out["diagnostics"] = list(self.diagnostics)
        return out


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, list):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    return v


DIAGNOSTICS = {"sigma_nabla_table", "energy"}
_TOP = {
    "name", "scale", "points_of_interest", "lagrangian", "boundary", "initial", "mode",
    "solver", "transformation", "convergence", "diagnostics",
}


def _parse_scale(r: _Reader, obj, path) -> ScaleConfig:
    r.mapping(obj, path, {"grid", "uniform", "cells", "budget", "interval_resolution", "probes"})
    kinds = [k for k in ("grid", "uniform", "cells") if k in obj]
    if len(kinds) != 1:
        raise r.m.error(path, "exactly one of 'grid', 'uniform' or 'cells' is required")
    kind = kinds[0]
    extra = {"budget", "interval_resolution", "probes"} & set(obj)
    if kind != "cells" and extra:
        raise r.m.error(path + (sorted(extra)[0],), "only analytic ('cells') scales take this key", key=True)
    budget = r.number(obj.get("budget", 40), path + ("budget",), integer=True)
    resolution = r.number(obj.get("interval_resolution", 11), path + ("interval_resolution",), integer=True)
    probes = r.number(obj.get("probes", 48), path + ("probes",), integer=True)
    p = path + (kind,)
    if kind == "grid":
        data = tuple(r.vector(obj["grid"], p))
    elif kind == "uniform":
        u = r.mapping(obj["uniform"], p, {"a", "b", "n"}, ("a", "b", "n"))
        data = {
            "a": r.number(u["a"], p + ("a",)),
            "b": r.number(u["b"], p + ("b",)),
            "n": r.number(u["n"], p + ("n",), integer=True),
        }
    else:
        if not isinstance(obj["cells"], list) or not obj["cells"]:
            raise r.m.error(p, "expected a non-empty list of cells")
        cells = []
        for i, c in enumerate(obj["cells"]):
            cp = p + (i,)
            r.mapping(c, cp, {"interval", "points", "family"})
            if len(c) != 1:
                raise r.m.error(cp, "a cell has exactly one of 'interval', 'points', 'family'")
            if "interval" in c:
                iv = r.vector(c["interval"], cp + ("interval",), 2)
                cells.append({"interval": iv})
            elif "points" in c:
                cells.append({"points": r.vector(c["points"], cp + ("points",))})
            else:
                fp = cp + ("family",)
                f = dict(r.mapping(c["family"], fp, _FAMILY_KEYS, ("kind",)))
                r.choice(f["kind"], fp + ("kind",), {"geometric", "power", "factorial", "custom"})
                for key in ("accumulation_point", "ratio", "exponent", "amplitude"):
                    if key in f:
                        f[key] = r.number(f[key], fp + (key,))
                if "start" in f:
                    f["start"] = r.number(f["start"], fp + ("start",), integer=True)
                if "side" in f:
                    r.choice(f["side"], fp + ("side",), {"left", "right"})
                if "generator" in f:
                    r.choice(f["generator"], fp + ("generator",), set(GENERATORS))
                cells.append({"family": f})
        data = tuple(cells)
    cfg = ScaleConfig(kind, data, budget, resolution, probes)
    try:
        if kind == "cells":
            cfg.analytic()
        else:
            cfg.grid()
    except (TimeScaleError, ValueError) as exc:
        raise r.m.error(path, str(exc)) from None
    return cfg


def _parse(obj, marks: _Marks) -> ProblemConfig:
    r = _Reader(marks)
    r.mapping(obj, (), _TOP, ("scale",))
    scale = _parse_scale(r, obj["scale"], ("scale",))
    kw: dict = {"scale": scale}
    if "name" in obj:
        kw["name"] = str(obj["name"])
    if "points_of_interest" in obj:
        kw["points_of_interest"] = tuple(r.vector(obj["points_of_interest"], ("points_of_interest",)))
    n = None
    if "lagrangian" in obj:
        try:
            L = lag.from_dict(obj["lagrangian"]) if isinstance(obj["lagrangian"], dict) else None
        except (lag.LagrangianError, TypeError, ValueError) as exc:
            raise marks.error(("lagrangian",), str(exc)) from None
        if L is None:
            raise marks.error(("lagrangian",), "expected a mapping")
        kw["lagrangian"] = L.to_dict()
        n = L.dim
    for sec, keys in (("boundary", ("ua", "ub")), ("initial", ("u0", "u1"))):
        if sec in obj:
            m = r.mapping(obj[sec], (sec,), set(keys), keys)
            kw[sec] = tuple(tuple(r.vector(m[k], (sec, k), n)) for k in keys)
    if "mode" in obj:
        try:
            kw["mode"] = Mode.parse(obj["mode"])
        except ValueError as exc:
            raise marks.error(("mode",), str(exc)) from None
    if "solver" in obj:
        s = r.mapping(obj["solver"], ("solver",), {"newton_tol", "max_iters"})
        if "newton_tol" in s:
            kw["newton_tol"] = r.number(s["newton_tol"], ("solver", "newton_tol"), positive=True)
        if "max_iters" in s:
            kw["max_iters"] = r.number(s["max_iters"], ("solver", "max_iters"), positive=True, integer=True)
    if "transformation" in obj:
        p = ("transformation",)
        t = dict(r.mapping(obj["transformation"], p,
                           {"kind", "direction", "plane", "dim", "A", "eta", "thetas", "tol"}, ("kind",)))
        kind = r.choice(t.pop("kind"), p + ("kind",), {"translation", "rotation", "linear_flow"})
        eta = r.number(t.pop("eta", 1.0), p + ("eta",), positive=True)
        thetas = r.number(t.pop("thetas", 9), p + ("thetas",), integer=True)
        if thetas < 5:
            raise marks.error(p + ("thetas",), f"at least 5 θ samples are required, got {thetas}")
        tol = t.pop("tol", None)
        if tol is not None:
            tol = r.number(tol, p + ("tol",), positive=True)
        tc = TransformationConfig(kind, _plain(t), eta, thetas, tol)
        try:
            fam = tc.family()
        except (ValueError, TypeError) as exc:
            raise marks.error(p, str(exc)) from None
        if n is not None and fam.dim != n:
            raise marks.error(p, f"family acts on dimension {fam.dim}, Lagrangian has {n}")
        norm = {k: v for k, v in fam.to_dict().items() if k not in ("kind", "eta")}
        kw["transformation"] = TransformationConfig(kind, norm, eta, thetas, tol)
    if "convergence" in obj:
        p = ("convergence",)
        c = r.mapping(obj["convergence"], p, {"N", "modes"}, ("N",))
        Ns = c["N"]
        if not isinstance(Ns, list) or len(Ns) < 2:
            raise marks.error(p + ("N",), "expected a list of at least two grid sizes")
        Ns = tuple(r.number(x, p + ("N", i), integer=True) for i, x in enumerate(Ns))
        if any(x < 3 for x in Ns):
            raise marks.error(p + ("N",), "grid sizes must be at least 3")
        modes = c.get("modes", ["nabla-delta"])
        if not isinstance(modes, list) or not modes:
            raise marks.error(p + ("modes",), "expected a non-empty list of modes")
        try:
            modes = tuple(Mode.parse(x) for x in modes)
        except ValueError as exc:
            raise marks.error(p + ("modes",), str(exc)) from None
        kw["convergence"] = ConvergenceConfig(Ns, modes)
    if "diagnostics" in obj:
        d = obj["diagnostics"]
        if not isinstance(d, list):
            raise marks.error(("diagnostics",), "expected a list")
        kw["diagnostics"] = tuple(r.choice(x, ("diagnostics", i), DIAGNOSTICS) for i, x in enumerate(d))
    return ProblemConfig(**kw)


def parse_config(text: str) -> ProblemConfig:
    """Parse and validate a YAML problem document."""
    try:
        obj = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ConfigError(f"YAML syntax error: {exc.problem}", line, col) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML error: {exc}") from None
    return _parse(obj, _Marks(text))


def load_config(path: str) -> ProblemConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def from_dict(obj: dict) -> ProblemConfig:
    """Validate an in-memory document (no position information)."""
    return _parse(_plain(obj), _NO_MARKS)


def dump_config(cfg: ProblemConfig) -> str:
    """Serialize to YAML; ``dump_config(parse_config(dump_config(c))) == dump_config(c)``."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, allow_unicode=True, width=120)
