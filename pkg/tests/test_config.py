"""YAML problem files: parsing, validation diagnostics, round trip."""

from __future__ import annotations

import textwrap

import pytest

from tscv.config import ConfigError, dump_config, from_dict, parse_config
from tscv.presets import PRESETS, get_preset
from tscv.solver import Mode

FULL = textwrap.dedent(
    """\
    name: demo
    scale:
      uniform: {a: 0, b: 2, n: 41}
    lagrangian:
      kind: quadratic
      M: [[1.0]]
      K: [[4.0]]
      c: [0.5]
    boundary:
      ua: [0.0]
      ub: [1.0]
    mode: delta-delta
    solver:
      newton_tol: 1e-11
      max_iters: 20
    transformation:
      kind: translation
      direction: [1.0]
      eta: 0.5
      thetas: 7
    diagnostics: [energy]
    """
)


def test_parse_full_document():
    cfg = parse_config(FULL)
    assert cfg.name == "demo" and cfg.mode is Mode.SHIFTED_DELTA_DELTA
    assert cfg.newton_tol == 1e-11 and cfg.max_iters == 20
    assert cfg.boundary == ((0.0,), (1.0,))
    g = cfg.scale.grid()
    assert len(g) == 41 and g.b == 2.0
    assert cfg.build_lagrangian().K[0, 0] == 4.0
    assert cfg.transformation.thetas == 7 and cfg.transformation.family().eta == 0.5
    assert cfg.diagnostics == ("energy",)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_round_trip_is_idempotent(name):
    text = dump_config(get_preset(name).config())
    again = dump_config(parse_config(text))
    assert again == text


def test_unknown_top_level_key_reports_position():
    text = FULL.replace("diagnostics: [energy]", "diagnostic: [energy]")
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert (err.value.line, err.value.column) == (21, 1)
    assert "diagnostic" in str(err.value)


def test_unknown_nested_key_reports_position():
    text = FULL.replace("  max_iters: 20", "  max_iter: 20")
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert (err.value.line, err.value.column) == (15, 3)


def test_too_few_thetas_rejected():
    with pytest.raises(ConfigError, match="thetas") as err:
        parse_config(FULL.replace("thetas: 7", "thetas: 4"))
    assert err.value.line == 20


def test_boundary_dimension_checked_at_parse_time():
    with pytest.raises(ConfigError, match="component"):
        parse_config(FULL.replace("ub: [1.0]", "ub: [1.0, 2.0]"))


def test_invalid_values():
    for old, new in [
        ("mode: delta-delta", "mode: sideways"),
        ("n: 41", "n: 2.5"),
        ("kind: quadratic", "kind: cubic"),
        ("K: [[4.0]]", "K: [[4.0, 1.0]]"),
        ("newton_tol: 1e-11", "newton_tol: -1"),
        ("kind: translation", "kind: shear"),
    ]:
        assert old in FULL
        with pytest.raises(ConfigError):
            parse_config(FULL.replace(old, new))


def test_yaml_syntax_error_position():
    with pytest.raises(ConfigError) as err:
        parse_config("scale:\n  grid: [0, 1\n")
    assert err.value.line is not None


def test_cells_scale_and_custom_generator():
    cfg = parse_config(
        textwrap.dedent(
            """\
            scale:
              cells:
                - interval: [-1, 0]
                - family: {kind: custom, generator: inv_k_times_k_plus_1, start: 1}
              budget: 20
              interval_resolution: 5
            points_of_interest: [0]
            """
        )
    )
    assert len(cfg.scale.grid()) == 20
    with pytest.raises(ConfigError, match="generator"):
        parse_config("scale:\n  cells:\n    - family: {kind: custom, generator: nope}\n")


def test_cells_only_options_rejected_for_grids():
    with pytest.raises(ConfigError):
        parse_config("scale:\n  grid: [0, 1, 2]\n  budget: 10\n")


def test_from_dict_has_no_positions():
    with pytest.raises(ConfigError) as err:
        from_dict({"scale": {"grid": [0, 1, 2]}, "bogus": 1})
    assert err.value.line is None


def test_convergence_section():
    cfg = parse_config(FULL + "convergence:\n  N: [11, 21]\n  modes: [nabla-delta, delta-delta]\n")
    assert cfg.convergence.N == (11, 21)
    assert cfg.convergence.modes == (Mode.NONSHIFTED_NABLA_DELTA, Mode.SHIFTED_DELTA_DELTA)
    with pytest.raises(ConfigError):
        parse_config(FULL + "convergence:\n  N: [11]\n")
