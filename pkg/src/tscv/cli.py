"""Command-line front end.

Verbs: ``classify``, ``solve``, ``noether``, ``convergence`` and
``presets list``.  Problems come from ``--config FILE`` (YAML) or
``--preset NAME``; artifacts are written to ``--out DIR``.

Exit codes: 0 success, 1 configuration or runtime error, 2 solver did not
converge.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis as an
from .analysis import truncate_to_grid
from .config import ConfigError, ProblemConfig, dump_config, load_config
from .exact import NoClosedForm, closed_form
from .lagrangians import LagrangianError
from .noether import NoetherError, check_invariance, drift, noether_constant, noether_constant_nabla
from .presets import PRESETS, get_preset
from .solver import (
    BVProblem,
    Mode,
    SolveReport,
    SolverError,
    discrete_energy,
    integrate,
    solve_bvp,
)
from .timescale import GridFunction, TimeScaleError, delta_derivative
from .variational import VariationalError, all_residuals, sigma_nabla_table

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


class CLIError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# output helpers


def _jsonable(obj):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8")


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(x if isinstance(x, str) else _fmt(x) for x in r))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# classify


def _point_record(scale: an.AnalyticScale, t: float, probes: int) -> dict:
    cont = an.sigma_continuous_at(scale, t)
    rec = {
        "t": float(t),
        "class": str(an.classify_point(scale, t)),
        "sigma_continuous": bool(cont.continuous_at),
        "rho_continuous": bool(an.rho_continuous_at(scale, t).continuous_at),
    }
    try:
        v = an.sigma_nabla_at(scale, t, probes)
    except TimeScaleError:
        rec.update(sigma_nabla_differentiable=None, sigma_nabla=None, reason="not-in-T_kappa")
    else:
        d = v.to_dict()
        rec.update(
            sigma_nabla_differentiable=d["sigma_nabla_differentiable"],
            sigma_nabla=d["sigma_nabla"],
            reason=d["reason"],
            left_limit=d["left_limit"],
            right_limit=d["right_limit"],
        )
    return rec


def classify(cfg: ProblemConfig) -> dict:
    scale = cfg.scale.analytic()
    pts = sorted(set(scale.notable_points()) | {scale.locate(t) for t in cfg.points_of_interest})
    records = [_point_record(scale, t, cfg.scale.probes) for t in pts]
    return {
        "name": cfg.name,
        "a": scale.a,
        "b": scale.b,
        "points": records,
        "sigma_continuous_everywhere": an.sigma_continuous_everywhere(scale),
        "quasi_regular": an.quasi_regular(scale),
    }


def _describe_point(rec: dict) -> list[str]:
    t = rec["t"]
    lines = []
    if not rec["sigma_continuous"]:
        lines.append(f"σ not continuous at {t:g} ({rec['class']})")
    if rec["sigma_nabla_differentiable"]:
        lines.append(f"σ^∇({t:g})={rec['sigma_nabla']:.12g}")
    elif rec["sigma_nabla_differentiable"] is False:
        why = {
            "ratio-diverges": "ratio diverges",
            "left-right-mismatch": f"left limit {rec['left_limit']} ≠ right limit {rec['right_limit']}",
            "RS∩LD-discontinuity": "σ is discontinuous",
            "ratio-undetermined": "ratio limit could not be determined",
        }.get(rec["reason"], rec["reason"])
        lines.append(f"σ^∇({t:g}) does not exist: {why}")
    return lines


def cmd_classify(cfg: ProblemConfig, out: Path) -> int:
    report = classify(cfg)
    write_json(out / "classification.json", report)
    poi = {float(t) for t in cfg.points_of_interest}
    for rec in report["points"]:
        if not poi or rec["t"] in poi or not rec["sigma_continuous"]:
            for line in _describe_point(rec):
                print(line)
    print(f"σ continuous everywhere: {report['sigma_continuous_everywhere']}")
    print(f"quasi-regular: {report['quasi_regular']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve / noether


def _grid_and_truncation(cfg: ProblemConfig):
    if cfg.scale.kind == "cells":
        tr = truncate_to_grid(cfg.scale.analytic(), cfg.scale.budget, cfg.scale.interval_resolution)
        return tr.grid, tr
    return cfg.scale.grid(), None


def run_solve(cfg: ProblemConfig) -> tuple[SolveReport, object]:
    L = cfg.build_lagrangian()
    grid, tr = _grid_and_truncation(cfg)
    if cfg.boundary is not None:
        rep = solve_bvp(BVProblem(L, grid, cfg.boundary[0], cfg.boundary[1], cfg.mode), cfg.solver_options())
    elif cfg.initial is not None:
        if cfg.mode is not Mode.NONSHIFTED_NABLA_DELTA:
            raise CLIError("forward integration is only available in nabla-delta mode")
        rep = integrate(L, grid, cfg.initial[0], cfg.initial[1], cfg.solver_options())
    else:
        raise CLIError("solve needs a 'boundary' or an 'initial' section")
    return rep, tr


def _trajectory_rows(cfg, L, u: GridFunction, residuals, noether_cols):
    N, n = len(u.scale), u.dim
    du = delta_derivative(u).values
    header = ["k", "t", *[f"u_{i + 1}" for i in range(n)], *[f"du_{i + 1}" for i in range(n)]]
    header += [f"res_{name}" for name in residuals]
    header += list(noether_cols)
    cols = {}
    for name, r in residuals.items():
        col = [None] * N
        for k, v in zip(r.indices, r.norms):
            col[int(k)] = float(v)
        cols[name] = col
    for name, I in noether_cols.items():
        col = [None] * N
        for k, v in zip(I.indices, I.scalar()):
            col[k] = float(v)
        cols[name] = col
    rows = []
    for k in range(N):
        row: list = [str(k), u.scale.points[k], *u.values[k]]
        row += list(du[k]) if k < N - 1 else [None] * n
        row += [cols[name][k] for name in residuals]
        row += [cols[name][k] for name in noether_cols]
        rows.append(row)
    return header, rows


def _noether_section(cfg: ProblemConfig, L, u: GridFunction):
    tc = cfg.transformation
    fam = tc.family()
    inv = check_invariance(L, fam, u, tc.thetas, tc.tol)
    I = noether_constant(L, fam, u)
    In = noether_constant_nabla(L, fam, u)
    section = {
        "family": fam.to_dict(),
        "invariance": inv.summary(),
        "drift_delta": drift(I).summary(),
        "drift_nabla": drift(In).summary(),
    }
    return section, {"noether_I": I, "noether_I_nabla": In}


def _solve_outputs(cfg: ProblemConfig, out: Path, with_noether: bool) -> int:
    L = cfg.build_lagrangian()
    rep, tr = run_solve(cfg)
    u = rep.trajectory
    residuals = all_residuals(L, u)
    summary: dict = {
        "name": cfg.name,
        "mode": cfg.mode.value,
        "solve": rep.summary(),
        "residuals": {k: r.summary() for k, r in residuals.items()},
    }
    noether_cols: dict = {}
    if cfg.transformation is not None:
        summary["noether"], noether_cols = _noether_section(cfg, L, u)
    elif with_noether:
        raise CLIError("the noether command needs a 'transformation' section")
    if "energy" in cfg.diagnostics:
        E = discrete_energy(L, u)
        summary["energy"] = drift(E).summary()
    if "sigma_nabla_table" in cfg.diagnostics:
        if tr is None:
            raise CLIError("sigma_nabla_table needs an analytic ('cells') scale")
        labels = {idx: k for idx, (_, k) in tr.family_terms.items()}
        table = sigma_nabla_table(L, u, labels)
        summary["sigma_nabla_table"] = table
        if len(table) >= 2:
            ks = np.log([r["k"] for r in table])
            vals = np.log([r["sigma_nabla"] for r in table])
            summary["sigma_nabla_growth_order"] = float(np.polyfit(ks, vals, 1)[0])
    header, rows = _trajectory_rows(cfg, L, u, residuals, noether_cols)
    _write_csv(out / "trajectory.csv", header, rows)
    write_json(out / "summary.json", summary)
    print(f"converged: {rep.converged}, iterations: {rep.iterations}, "
          f"residual: {rep.final_residual_norm:.3e}")
    for k, r in residuals.items():
        extra = "" if r.fitted_constant is None else f", c = {r.fitted_constant.tolist()}"
        print(f"  {k}: max_norm {r.max_norm:.3e}{extra}")
    if "noether" in summary:
        inv = summary["noether"]["invariance"]
        dr = summary["noether"]["drift_delta"]
        print(f"invariant: {inv['invariant']} (max θ-variation {inv['max_theta_variation']:.3e}); "
              f"Noether drift {dr['max_abs_deviation_from_mean']:.3e}")
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_solve(cfg: ProblemConfig, out: Path) -> int:
    return _solve_outputs(cfg, out, with_noether=False)


def cmd_noether(cfg: ProblemConfig, out: Path) -> int:
    if cfg.transformation is None:
        raise CLIError("the noether command needs a 'transformation' section")
    return _solve_outputs(cfg, out, with_noether=True)


# ---------------------------------------------------------------------------
# convergence


def _order(hs, errs) -> float | None:
    hs, errs = np.asarray(hs), np.asarray(errs)
    if np.any(errs <= 0):
        return None
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def convergence_study(cfg: ProblemConfig) -> dict:
    """Errors against the continuous solution on uniform grids of the configured sizes."""
    if cfg.convergence is None:
        raise CLIError("the convergence command needs a 'convergence' section with N values")
    if cfg.boundary is None:
        raise CLIError("the convergence command needs boundary values")
    L = cfg.build_lagrangian()
    grid0 = cfg.scale.grid()
    a, b = grid0.a, grid0.b
    exact = closed_form(L, a, b, cfg.boundary[0], cfg.boundary[1])
    from .timescale import GridScale

    rows = []
    sols: dict = {}
    for N in cfg.convergence.N:
        s = GridScale.uniform(a, b, N)
        for m in cfg.convergence.modes:
            rep = solve_bvp(BVProblem(L, s, cfg.boundary[0], cfg.boundary[1], m), cfg.solver_options())
            if not rep.converged:
                raise SolverError(f"N={N}, mode {m.flag}: Newton did not converge")
            u = rep.trajectory.values[:, 0]
            sols[(N, m)] = u
            rows.append({"N": N, "h": (b - a) / (N - 1), "mode": m.flag,
                         "max_error": float(np.max(np.abs(u - exact(s.points))))})
    summary: dict = {"name": cfg.name, "a": a, "b": b, "modes": {}}
    magnitude = 1.0 + max(float(np.max(np.abs(v))) for v in sols.values())
    for m in cfg.convergence.modes:
        rs = [r for r in rows if r["mode"] == m.flag]
        errs = [r["max_error"] for r in rs]
        exact_flag = max(errs) <= 1e-12 * magnitude
        summary["modes"][m.flag] = {
            "order": None if exact_flag else _order([r["h"] for r in rs], errs),
            "exact": exact_flag,
            "max_errors": errs,
        }
    if len(cfg.convergence.modes) >= 2:
        m0, m1 = cfg.convergence.modes[:2]
        diffs = [float(np.max(np.abs(sols[(N, m0)] - sols[(N, m1)]))) for N in cfg.convergence.N]
        hs = [(b - a) / (N - 1) for N in cfg.convergence.N]
        summary["mode_difference"] = {
            "modes": [m0.flag, m1.flag],
            "max_differences": diffs,
            "order": None if max(diffs) <= 1e-12 * magnitude else _order(hs, diffs),
        }
        for r in rows:
            if r["mode"] == m0.flag:
                r["difference"] = diffs[cfg.convergence.N.index(r["N"])]
    summary["rows"] = rows
    return summary


def cmd_convergence(cfg: ProblemConfig, out: Path) -> int:
    try:
        study = convergence_study(cfg)
    except NoClosedForm as exc:
        raise CLIError(str(exc)) from None
    _write_csv(
        out / "convergence.csv",
        ["mode", "N", "h", "max_error", "difference"],
        [[r["mode"], str(r["N"]), r["h"], r["max_error"], r.get("difference")] for r in study["rows"]],
    )
    write_json(out / "summary.json", {k: v for k, v in study.items() if k != "rows"})
    for flag, info in study["modes"].items():
        order = "exact" if info["exact"] else f"{info['order']:.4f}"
        print(f"{flag}: empirical order {order}")
    if "mode_difference" in study:
        d = study["mode_difference"]
        od = "n/a (identical)" if d["order"] is None else f"{d['order']:.4f}"
        print(f"difference {d['modes'][0]} vs {d['modes'][1]}: order {od}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


COMMANDS = {
    "classify": cmd_classify,
    "solve": cmd_solve,
    "noether": cmd_noether,
    "convergence": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tscv",
        description="Calculus of variations on time scales: classification, solving, Noether checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="YAML problem file")
        src.add_argument("--preset", help="named preset (see 'presets list')")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--mode", choices=["nabla-delta", "delta-delta", "delta-nabla"],
                       help="override the problem's Euler-Lagrange form")
        p.add_argument("--dump-config", action="store_true",
                       help="also write the normalized problem as config.yaml")
    pre = sub.add_parser("presets", help="inspect presets")
    pre_sub = pre.add_subparsers(dest="presets_command", required=True)
    pre_sub.add_parser("list", help="list preset names")
    show = pre_sub.add_parser("show", help="print a preset as YAML")
    show.add_argument("name")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            if args.presets_command == "list":
                for p in PRESETS.values():
                    print(f"{p.name:24s} {p.description}")
            else:
                print(dump_config(get_preset(args.name).config()), end="")
            return EXIT_OK
        cfg = load_config(str(args.config)) if args.config else get_preset(args.preset).config()
        if args.mode:
            cfg = cfg.with_mode(args.mode)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.dump_config:
            (args.out / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
        return COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (CLIError, KeyError, OSError, SolverError, TimeScaleError, LagrangianError,
            VariationalError, NoetherError, NoClosedForm) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
