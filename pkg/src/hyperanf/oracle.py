"""Exact neighbourhood functions: all-sources BFS and the clique-path closed form."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from .graph import Graph

MAX_NODES = 10**6
MAX_WORK = 10**11


class GuardExceeded(RuntimeError):
    """The requested exact computation is above the configured size guard."""


@dataclass(frozen=True)
class ExactNf:
    """Exact ``N(0..D)``: number of ordered pairs at distance at most ``t``."""

    values: tuple[int, ...]

    @property
    def D(self) -> int:
        return len(self.values) - 1

    def to_json_dict(self, n: int) -> dict:
        return {
            "exact": True,
            "n": n,
            "iterations": self.D,
            "values": [float(v) for v in self.values],
        }

    def to_json(self, n: int) -> str:
        return json.dumps(self.to_json_dict(n), sort_keys=True)


@njit(nogil=True, cache=True)
def _bfs_histogram(offsets, succ, lo, hi, n):
    hist = np.zeros(n + 1, dtype=np.int64)
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for s in range(lo, hi):
        head = 0
        tail = 1
        queue[0] = s
        dist[s] = 0
        while head < tail:
            v = queue[head]
            head += 1
            dv = dist[v]
            hist[dv] += 1
            for e in range(offsets[v], offsets[v + 1]):
                w = succ[e]
                if dist[w] < 0:
                    dist[w] = dv + 1
                    queue[tail] = w
                    tail += 1
        for i in range(tail):
            dist[queue[i]] = -1
    return hist


def distance_histogram(g: Graph, threads: int | None = None, chunk: int = 256) -> np.ndarray:
    """Counts of ordered reachable pairs by exact distance (index = distance)."""
    n = g.n
    if n == 0:
        return np.zeros(1, dtype=np.int64)
    threads = threads or os.cpu_count() or 1
    ranges = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]

    def run(rng):
        return _bfs_histogram(g.offsets, g.successors, rng[0], rng[1], n)

    if threads == 1 or len(ranges) == 1:
        parts = map(run, ranges)
        hist = sum(parts, np.zeros(n + 1, dtype=np.int64))
    else:
        with ThreadPoolExecutor(threads) as pool:
            hist = sum(pool.map(run, ranges), np.zeros(n + 1, dtype=np.int64))
    last = int(np.flatnonzero(hist)[-1])
    return hist[: last + 1]


def exact_nf(
    g: Graph, *, threads: int | None = None, max_nodes: int = MAX_NODES, max_work: int = MAX_WORK
) -> ExactNf:
    """Exact neighbourhood function by BFS from every node."""
    if g.n > max_nodes or g.n * max(g.num_arcs, 1) > max_work:
        raise GuardExceeded(
            f"exact NF on n={g.n}, arcs={g.num_arcs} exceeds guard "
            f"(n <= {max_nodes}, n*arcs <= {max_work})"
        )
    if g.n == 0:
        return ExactNf(())
    hist = distance_histogram(g, threads=threads)
    return ExactNf(tuple(int(v) for v in np.cumsum(hist)))


def clique_path_nf(k: int, l: int, t: int) -> int:
    """Closed-form neighbourhood function of :func:`~hyperanf.graph.gen_clique_path`."""
    if k < 1 or l < 1 or t < 0:
        raise ValueError(f"need k >= 1, l >= 1, t >= 0; got k={k}, l={l}, t={t}")
    if t == 0:
        return 2 * k + l
    if t <= l:
        value = (t + 1) * (2 * k + l - Fraction(t, 2)) - 2 * k + 2 * k * k
    else:
        value = (l + 1) * (2 * k + Fraction(l, 2)) - 2 * k + 3 * k * k
    assert value.denominator == 1
    return int(value)
