import numpy as np
import pytest

from repboot.core import CompositionTopology, ServiceRecord


def make_topology(n, edges, prefix="s"):
    services = tuple(ServiceRecord(f"{prefix}{i}") for i in range(1, n + 1))
    return CompositionTopology(services, tuple((f"{prefix}{a}", f"{prefix}{b}") for a, b in edges))


def random_dag_edges(rng, n, p=0.3):
    """Random connected DAG over 1..n built in topological order."""
    edges = set()
    for j in range(2, n + 1):
        edges.add((int(rng.integers(1, j)), j))
        for i in range(1, j):
            if rng.random() < p:
                edges.add((i, j))
    return sorted(edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
