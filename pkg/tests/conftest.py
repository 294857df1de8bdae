import numpy as np
import pytest
from hypothesis import strategies as st

from cactus.graph_cactus import PointedGraph


def random_connected_graph(rng, n_max=12, p_extra=0.3):
    n = int(rng.integers(1, n_max + 1))
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(v))
        edges.add((u, v))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p_extra:
                edges.add((u, v))
    root = int(rng.integers(n))
    return PointedGraph(n, tuple(sorted(edges)), root)


@st.composite
def connected_graphs(draw, max_vertices=10):
    n = draw(st.integers(1, max_vertices))
    parents = [draw(st.integers(0, v - 1)) for v in range(1, n)]
    edges = {(p, v) for v, p in zip(range(1, n), parents)}
    if n > 1:
        extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
        edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    root = draw(st.integers(0, n - 1))
    return PointedGraph(n, tuple(sorted(edges)), root)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def path_graph(n, root=0):
    return PointedGraph(n, tuple((i, i + 1) for i in range(n - 1)), root)


def four_cycle():
    # rho=0, a=1, b=2, c=3
    return PointedGraph(4, ((0, 1), (1, 2), (2, 3), (0, 3)), 0)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
