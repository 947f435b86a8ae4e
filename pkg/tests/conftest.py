import numpy as np
import pytest

from gwac.graph import UGraph


def random_graph(rng, n, p, weighted=True, min_edges=1):
    """Erdos-Renyi style test graph with at least ``min_edges`` edges."""
    while True:
        iu, ju = np.triu_indices(n, k=1)
        keep = rng.random(len(iu)) < p
        if keep.sum() >= min_edges:
            break
    w = rng.uniform(0.1, 2.0, keep.sum()) if weighted else np.ones(keep.sum())
    return UGraph.from_edges(n, np.column_stack([iu[keep], ju[keep]]), w)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def triangle():
    return UGraph.from_edges(3, [(0, 1), (0, 2), (1, 2)], [0.2, 1.7, 0.9])


@pytest.fixture
def path3():
    return UGraph.from_edges(3, [(0, 1), (1, 2)])
