"""Command-line front-end: verbs, artifacts, exit codes, determinism, runtime."""

from __future__ import annotations

import csv
import json
import subprocess
import sys
import time

import pytest

from tscv.cli import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, main
from tscv.presets import PRESETS

CLASSIFY = sorted(n for n in PRESETS if n[:4] in ("ex2_", "ex3_", "ex4_"))
SOLVABLE = sorted(n for n in PRESETS if n not in CLASSIFY)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_presets_list(capsys):
    code, out, _ = run(capsys, "presets", "list")
    assert code == EXIT_OK
    names = [line.split()[0] for line in out.splitlines()]
    assert names == list(PRESETS)


def test_presets_show_is_loadable(capsys, tmp_path):
    code, out, _ = run(capsys, "presets", "show", "rotational_noether")
    assert code == EXIT_OK
    cfg = tmp_path / "rot.yaml"
    cfg.write_text(out, encoding="utf-8")
    code, _, _ = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == EXIT_OK


@pytest.mark.parametrize(
    "preset, line",
    [
        ("ex2_5", "σ not continuous at 1"),
        ("ex3_4", "σ^∇(0)=2"),
        ("ex4_1", "σ^∇(0) does not exist: ratio diverges"),
    ],
)
def test_classify_messages(capsys, tmp_path, preset, line):
    code, out, _ = run(capsys, "classify", "--preset", preset, "--out", str(tmp_path))
    assert code == EXIT_OK
    assert any(l.startswith(line) for l in out.splitlines()), out
    rep = read_json(tmp_path / "classification.json")
    assert {"points", "sigma_continuous_everywhere", "quasi_regular"} <= set(rep)


def test_solve_oscillator(capsys, tmp_path):
    code, _, _ = run(capsys, "solve", "--preset", "oscillator", "--out", str(tmp_path))
    assert code == EXIT_OK
    summary = read_json(tmp_path / "summary.json")
    assert summary["solve"]["converged"] is True
    assert summary["solve"]["final_residual_norm"] < 1e-10
    with open(tmp_path / "trajectory.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:4] == ["k", "t", "u_1", "du_1"]
    assert {"res_integral_delta", "res_diff_nabla_delta", "res_diff_delta_delta_shifted",
            "res_diff_delta_nabla"} <= set(rows[0])
    assert len(rows) == 102
    assert "energy" in summary


def test_solve_counterexample_summary(capsys, tmp_path):
    code, _, _ = run(capsys, "solve", "--preset", "ex1_counterexample", "--out", str(tmp_path))
    assert code == EXIT_OK
    s = read_json(tmp_path / "summary.json")
    integral = s["residuals"]["integral_delta"]
    assert integral["max_norm"] <= 1e-14 and abs(integral["fitted_constant"][0]) <= 1e-14
    table = s["sigma_nabla_table"]
    values = [r["sigma_nabla"] for r in table]
    assert values == sorted(values) and values[-1] > 5
    assert s["sigma_nabla_growth_order"] >= 0.9


def test_malformed_config_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scale:\n  grid: [0, 1, 2]\nlagrangien: {kind: rotational}\n", encoding="utf-8")
    code, _, err = run(capsys, "solve", "--config", str(bad), "--out", str(tmp_path))
    assert code == EXIT_ERROR
    assert "line 3, column 1" in err and "lagrangien" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "solve", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path))
    assert code == EXIT_ERROR and err


def test_unknown_preset(capsys, tmp_path):
    code, _, err = run(capsys, "solve", "--preset", "ex9", "--out", str(tmp_path))
    assert code == EXIT_ERROR and "unknown preset" in err


def test_not_converged_exit_2(capsys, tmp_path):
    cfg = tmp_path / "hard.yaml"
    cfg.write_text(
        "scale: {uniform: {a: 0, b: 2, n: 80}}\n"
        "lagrangian:\n  kind: polynomial\n  terms:\n"
        "    - {coef: 0.5, x: [0], v: [2]}\n    - {coef: 0.1, x: [0], v: [4]}\n"
        "    - {coef: -0.05, x: [4], v: [0]}\n"
        "boundary: {ua: [0], ub: [1.5]}\nsolver: {max_iters: 1}\n",
        encoding="utf-8",
    )
    code, _, _ = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))
    assert code == EXIT_NOT_CONVERGED
    assert read_json(tmp_path / "summary.json")["solve"]["converged"] is False


def test_noether_rotational(capsys, tmp_path):
    code, _, _ = run(capsys, "noether", "--preset", "rotational_noether", "--out", str(tmp_path))
    assert code == EXIT_OK
    n = read_json(tmp_path / "summary.json")["noether"]
    assert n["invariance"]["invariant"] is True
    assert n["drift_delta"]["max_abs_deviation_from_mean"] < 1e-10
    with open(tmp_path / "trajectory.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert "noether_I" in header


def test_noether_counterexample_not_invariant(capsys, tmp_path):
    code, _, _ = run(capsys, "noether", "--preset", "ex1_counterexample", "--out", str(tmp_path))
    assert code == EXIT_OK
    inv = read_json(tmp_path / "summary.json")["noether"]["invariance"]
    assert inv["invariant"] is False and inv["max_theta_variation"] == pytest.approx(1.0)


def test_noether_needs_family(capsys, tmp_path):
    code, _, err = run(capsys, "noether", "--preset", "oscillator", "--out", str(tmp_path))
    assert code == EXIT_ERROR and "transformation" in err


def test_noether_thetas_validation(capsys, tmp_path):
    code, out, _ = run(capsys, "presets", "show", "rotational_noether")
    cfg = tmp_path / "rot.yaml"
    cfg.write_text(out.replace("thetas: 9", "thetas: 3"), encoding="utf-8")
    code, _, err = run(capsys, "noether", "--config", str(cfg), "--out", str(tmp_path))
    assert code == EXIT_ERROR and "thetas" in err


def test_convergence_oscillator(capsys, tmp_path):
    code, out, _ = run(capsys, "convergence", "--preset", "oscillator", "--out", str(tmp_path))
    assert code == EXIT_OK
    s = read_json(tmp_path / "summary.json")
    for flag in ("nabla-delta", "delta-delta"):
        assert 1.9 <= s["modes"][flag]["order"] <= 2.1
    lines = (tmp_path / "convergence.csv").read_text().splitlines()
    assert lines[0] == "mode,N,h,max_error,difference" and len(lines) == 11


def test_convergence_free_particle_exact(capsys, tmp_path):
    code, _, _ = run(capsys, "convergence", "--preset", "free_particle", "--out", str(tmp_path))
    assert code == EXIT_OK
    s = read_json(tmp_path / "summary.json")
    for info in s["modes"].values():
        assert info["exact"] is True and max(info["max_errors"]) <= 1e-12


def test_convergence_without_closed_form(capsys, tmp_path):
    code, out, _ = run(capsys, "presets", "show", "rotational_noether")
    cfg = tmp_path / "rot.yaml"
    cfg.write_text(out + "convergence: {N: [11, 21]}\n", encoding="utf-8")
    code, _, err = run(capsys, "convergence", "--config", str(cfg), "--out", str(tmp_path))
    assert code == EXIT_ERROR and "closed-form" in err


def test_mode_override_and_dump(capsys, tmp_path):
    code, _, _ = run(capsys, "solve", "--preset", "forced_oscillator", "--mode", "delta-nabla",
                     "--dump-config", "--out", str(tmp_path))
    assert code == EXIT_OK
    assert read_json(tmp_path / "summary.json")["mode"] == "nonshifted_delta_nabla"
    assert "mode: delta-nabla" in (tmp_path / "config.yaml").read_text()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tscv", "presets", "list"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "oscillator" in proc.stdout


def _commands(name):
    if name in CLASSIFY:
        return ["classify"]
    cmds = ["solve"]
    cfg = PRESETS[name].config()
    if cfg.transformation is not None:
        cmds.append("noether")
    if cfg.convergence is not None:
        cmds.append("convergence")
    return cmds


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_outputs_are_byte_identical(capsys, tmp_path, name):
    for cmd in _commands(name):
        dirs = [tmp_path / f"{cmd}{i}" for i in range(2)]
        for d in dirs:
            assert run(capsys, cmd, "--preset", name, "--out", str(d))[0] == EXIT_OK
        files = sorted(p.name for p in dirs[0].iterdir())
        assert files == sorted(p.name for p in dirs[1].iterdir()) and files
        for f in files:
            assert (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes(), f


@pytest.mark.parametrize("name", sorted(n for n in PRESETS if n.startswith("ex")))
def test_ex_presets_run_quickly(capsys, tmp_path, name):
    start = time.perf_counter()
    for cmd in _commands(name):
        assert run(capsys, cmd, "--preset", name, "--out", str(tmp_path / cmd))[0] == EXIT_OK
    assert time.perf_counter() - start < 10.0
