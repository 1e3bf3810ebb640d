import numpy as np
import pytest

from percolab.graph import Graph
from percolab.lattice import nn_pairs
from percolab.params import Boundary, LatticeBox
from percolab.rng import RngStream


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the slow statistical acceptance tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running statistical test (needs --runslow)')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng_factory():
    """Build RngStreams with a fixed test seed"""
    def _rng(stream=0, seed=20240611):
        return RngStream(seed, stream)
    return _rng


@pytest.fixture
def rng(rng_factory):
    return rng_factory()


@pytest.fixture
def path_graph():
    """0 - 1 - 2 - 3 - 4"""
    return Graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])


@pytest.fixture
def triangle():
    return Graph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def star():
    """Centre 0 with four leaves"""
    return Graph(5, [(0, 1), (0, 2), (0, 3), (0, 4)])


@pytest.fixture
def two_components():
    """A triangle on 0..2 and an edge 3 - 4, plus isolated node 5"""
    return Graph(6, [(0, 1), (1, 2), (2, 0), (3, 4)])


@pytest.fixture
def random_graphs():
    """500 small random multigraphs with loops, for oracle comparisons.

    Most have at most 12 nodes; every tenth has up to 29.
    """
    gen = np.random.default_rng(7)
    graphs = []
    for i in range(500):
        n = int(gen.integers(1, 30 if i % 10 == 0 else 13))
        m = int(gen.integers(0, 2 * n + 1))
        graphs.append(Graph(n, gen.integers(0, n, size=(m, 2))))
    return graphs


@pytest.fixture
def tiny_box():
    return LatticeBox(2, 4, Boundary.FREE)


@pytest.fixture
def lattice_graph():
    """Build the full nearest-neighbour lattice of a box"""
    def _build(box):
        src, dst = nn_pairs(box)
        return Graph.from_edges(box.num_sites, src, dst, positions=box.coords())
    return _build
