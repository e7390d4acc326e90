import numpy as np
import pytest

from bcwave.connecting import assemble_dtn
from bcwave.reconstruct import working_time_grid
from bcwave.wave1d import SpatialGrid, TimeGrid, bump, time_step_for

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def q_bump(x):
    return 5 * bump(x, 0.2, 0.8)


@pytest.fixture(scope="session")
def grid401():
    sg = SpatialGrid(401)
    return sg, TimeGrid.covering(2.4, time_step_for(sg.dx))


@pytest.fixture(scope="session")
def dtn_bump(grid401):
    sg, tg = grid401
    return assemble_dtn(q_bump(sg.x), None, sg, tg)


@pytest.fixture(scope="session")
def grid801():
    sg = SpatialGrid(801)
    return sg, TimeGrid.covering(2.4, time_step_for(sg.dx))


@pytest.fixture(scope="session")
def dtn801_bump(grid801):
    sg, tg = grid801
    return assemble_dtn(q_bump(sg.x), None, sg, tg)


@pytest.fixture(scope="session")
def dtn_aligned_bump():
    """DtN of 5*bump on the step-aligned grid used by control and reconstruction."""
    sg = SpatialGrid(401)
    tg = working_time_grid(sg.dx, t_max=2.4)
    return sg, tg, assemble_dtn(q_bump(sg.x), None, sg, tg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
