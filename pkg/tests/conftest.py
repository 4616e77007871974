import numpy as np
import pytest

from lggd import build_graph


def random_connected_edges(rng, n, extra):
    """Random spanning tree plus `extra` distinct chords."""
    extra = min(extra, n * (n - 1) // 2 - (n - 1))
    edges = {(int(rng.integers(i)), i) for i in range(1, n)}
    while len(edges) < n - 1 + extra:
        i, j = int(rng.integers(n)), int(rng.integers(n))
        if i != j:
            edges.add((min(i, j), max(i, j)))
    return sorted(edges)


def random_connected_graph(rng, n, extra, unit_weights=True, wmin=0.5):
    edges = random_connected_edges(rng, n, extra)
    if unit_weights:
        return build_graph(n, [(i, j, 1.0) for i, j in edges])
    return build_graph(
        n, [(i, j, float(rng.uniform(wmin, 1.0))) for i, j in edges]
    )


@pytest.fixture
def path3():
    return build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
