from __future__ import annotations

from collections import deque

import numpy as np
import pytest
from hypothesis import settings

from hyperanf.graph import Graph

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def bfs_balls(g: Graph, radius: int) -> list[set[int]]:
    """Plain-python balls B(v, radius) for every node."""
    balls = []
    for s in range(g.n):
        dist = {s: 0}
        q = deque([s])
        while q:
            v = q.popleft()
            if dist[v] == radius:
                continue
            for w in g.successors_of(v).tolist():
                if w not in dist:
                    dist[w] = dist[v] + 1
                    q.append(w)
        balls.append(set(dist))
    return balls


def brute_force_nf(g: Graph) -> list[int]:
    """N(t) by Floyd-Warshall style distance matrix; tiny graphs only."""
    n = g.n
    inf = n + 1
    d = np.full((n, n), inf, dtype=np.int64)
    np.fill_diagonal(d, 0)
    src, dst = g.arcs()
    d[src, dst] = np.minimum(d[src, dst], 1)
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    finite = d[d < inf]
    top = int(finite.max())
    return [int((finite <= t).sum()) for t in range(top + 1)]


@pytest.fixture
def path3() -> Graph:
    return Graph.from_arcs(3, [0, 1], [1, 2])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
