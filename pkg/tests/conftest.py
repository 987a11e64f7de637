import numpy as np
import pytest

from ssprofile import demo
from ssprofile.continuation import extend_global
from ssprofile.core import build_grid
from ssprofile.expander import picard_solve

# criterion number -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def contraction_grid():
    bd = demo.CONTRACTION_BOUNDARY
    return build_grid(bd.delta, bd.delta, 256, 0, 1.03)


@pytest.fixture(scope="session")
def demo_inner():
    grid = demo.expander_grid()
    inner, history = picard_solve(demo.EXPANDER_PARAMS, demo.EXPANDER_BOUNDARY, grid)
    return grid, inner, history


@pytest.fixture(scope="session")
def demo_global(demo_inner):
    grid, inner, _ = demo_inner
    return extend_global(inner, demo.EXPANDER_PARAMS, demo.EXPANDER_BOUNDARY,
                         outer_nodes=grid.outer)


@pytest.fixture(scope="session")
def demo_global_coarse(demo_inner):
    grid, inner, _ = demo_inner
    coarse = build_grid(grid.delta, grid.r_max, 256, len(grid.outer) // 2, 1.03,
                        demo.EXPANDER_GRID["outer_length"])
    return extend_global(inner, demo.EXPANDER_PARAMS, demo.EXPANDER_BOUNDARY,
                         outer_nodes=coarse.outer)


@pytest.fixture(scope="session")
def contraction_run():
    return picard_solve(demo.CONTRACTION_PARAMS, demo.CONTRACTION_BOUNDARY, contraction_grid())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
