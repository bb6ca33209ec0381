"""Shared strategies and helpers."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from tscv.timescale import GridFunction, GridScale


def random_scale(rng: np.random.Generator, n: int, a: float = 0.0, spread: float = 1.0) -> GridScale:
    """Random grid with gaps drawn from [0.1, 1] (ratio-bounded, never degenerate)."""
    gaps = rng.uniform(0.1, 1.0, n - 1)
    return GridScale(a + spread * np.concatenate([[0.0], np.cumsum(gaps)]))


def random_function(rng: np.random.Generator, scale: GridScale, dim: int = 1) -> GridFunction:
    return GridFunction(scale, rng.normal(size=(len(scale), dim)))


@st.composite
def grids(draw, min_size: int = 3, max_size: int = 30) -> GridScale:
    n = draw(st.integers(min_size, max_size))
    gaps = draw(st.lists(st.floats(0.05, 2.0), min_size=n - 1, max_size=n - 1))
    a = draw(st.floats(-10.0, 10.0))
    return GridScale(a + np.concatenate([[0.0], np.cumsum(gaps)]))


@st.composite
def grid_functions(draw, scale: GridScale | None = None, dim: int | None = None) -> GridFunction:
    scale = scale if scale is not None else draw(grids())
    dim = dim if dim is not None else draw(st.integers(1, 3))
    vals = draw(
        st.lists(st.floats(-100.0, 100.0), min_size=len(scale) * dim, max_size=len(scale) * dim)
    )
    return GridFunction(scale, np.reshape(vals, (len(scale), dim)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


#: ``(criterion, line)`` records appended by the acceptance suite.
ACCEPTANCE_LINES: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
