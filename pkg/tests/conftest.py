import numpy as np
import pytest

from vrjp_bench import SimConfig, TimeScale, complete_graph, cycle_graph, simulate, time_change
from vrjp_bench.graph import Graph

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def k3():
    return complete_graph(3)


@pytest.fixture
def square():
    return cycle_graph(4)


def random_weights(g: Graph, rng: np.random.Generator, lo=0.5, hi=2.0) -> dict:
    return {e: float(rng.uniform(lo, hi)) for e in g.edges}


def y_trajectory(g, F, seed, trial=0, horizon=2.0, start=0):
    """Raw-clock simulation moved onto the VRJP clock."""
    x = simulate(g, F, SimConfig(start, horizon, seed), trial)
    return time_change(x, TimeScale.vrjp(g.vertex_count), "X->Y")
