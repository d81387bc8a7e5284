import numpy as np
import pytest

from rwspectral.graph import Graph
from rwspectral.model import B_EQ10, DcsbmModel, WeightDist


def random_connected_graph(rng, n, p):
    """Erdos-Renyi edges plus a random spanning tree, so the graph is connected."""
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    edges = list(zip(iu[keep], ju[keep]))
    order = rng.permutation(n)
    for k in range(1, n):
        edges.append((order[k], order[rng.integers(k)]))
    return Graph.from_edges(n, np.array(edges))


def path_graph(n):
    return Graph.from_edges(n, np.array([(i, i + 1) for i in range(n - 1)]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def eq10_model():
    return DcsbmModel(B_EQ10, np.full(3, 1 / 3), WeightDist.uniform(0.25, 1.0), 1.0, "dense")


# Acceptance results, printed once at the end of the run.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key:>2}. {name}: {detail}")
