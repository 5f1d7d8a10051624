"""Shared fixtures and independent brute-force oracles for the test suite.

The brute-force routines here enumerate vertex subsets directly and are the
reference implementations the faster library code is checked against; they
must stay independent of the modules under test.
"""

from itertools import combinations

import numpy as np
import pytest

from faircut.graph import CapacitatedGraph


def brute_min_cut_value(g: CapacitatedGraph, s: int, t: int) -> float:
    """Minimum undirected boundary over all S with s in S, t outside."""
    others = [v for v in range(g.n) if v not in (s, t)]
    best = float("inf")
    for k in range(len(others) + 1):
        for extra in combinations(others, k):
            side = {s, *extra}
            value = 0.0
            for u, v, c in zip(g.us, g.vs, g.caps):
                if (int(u) in side) != (int(v) in side):
                    value += float(c)
            best = min(best, value)
    return best


def brute_opt_congestion(g: CapacitatedGraph, d: np.ndarray) -> float:
    """max over proper subsets of demand-inside / boundary-capacity."""
    best = 0.0
    for bits in range(1, (1 << g.n) - 1):
        side = [v for v in range(g.n) if (bits >> v) & 1]
        delta = float(d[side].sum())
        if delta <= 0:
            continue
        value = 0.0
        for u, v, c in zip(g.us, g.vs, g.caps):
            if ((bits >> int(u)) & 1) != ((bits >> int(v)) & 1):
                value += float(c)
        if value <= 0:
            return float("inf")
        best = max(best, delta / value)
    return best


def brute_directed_cut(tails, heads, caps, side: set, n: int) -> float:
    """Directed boundary value recomputed from scratch."""
    total = 0.0
    for a in range(len(tails)):
        if int(tails[a]) in side and int(heads[a]) not in side:
            total += float(caps[a])
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def small_graph(rng, n_lo=3, n_hi=10, max_cap=9, density=2.0) -> CapacitatedGraph:
    from faircut.generators import random_connected_graph

    n = int(rng.integers(n_lo, n_hi + 1))
    m = int(max(n - 1, min(n * (n - 1) // 2, round(density * n))))
    return random_connected_graph(n, m, rng, max_cap=max_cap)
