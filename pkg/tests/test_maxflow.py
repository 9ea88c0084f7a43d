import itertools

import numpy as np
import pytest

from microforge.maxflow import Dinic


def brute_force_min_cut(n, edges, s, t):
    """Minimum over all s/t bipartitions of crossing undirected capacity."""
    best = np.inf
    others = [v for v in range(n) if v not in (s, t)]
    for bits in itertools.product((0, 1), repeat=len(others)):
        side = {s: 0, t: 1}
        side.update(dict(zip(others, bits)))
        w = sum(c for u, v, c in edges if side[u] != side[v])
        best = min(best, w)
    return best


def test_single_edge():
    d = Dinic(2)
    d.add_edge(0, 1, 3.5)
    assert d.max_flow(0, 1) == pytest.approx(3.5)


def test_series_bottleneck():
    d = Dinic(3)
    d.add_edge(0, 1, 5.0)
    d.add_edge(1, 2, 2.0)
    assert d.max_flow(0, 2) == pytest.approx(2.0)


def test_parallel_paths():
    d = Dinic(4)
    d.add_edge(0, 1, 3.0)
    d.add_edge(1, 3, 3.0)
    d.add_edge(0, 2, 4.0)
    d.add_edge(2, 3, 1.0)
    assert d.max_flow(0, 3) == pytest.approx(4.0)


def test_classic_diamond_with_cross_edge():
    d = Dinic(4)
    d.add_edge(0, 1, 10.0)
    d.add_edge(0, 2, 10.0)
    d.add_edge(1, 3, 10.0)
    d.add_edge(2, 3, 10.0)
    d.add_edge(1, 2, 1.0)
    assert d.max_flow(0, 3) == pytest.approx(20.0)


def test_disconnected_zero_flow():
    d = Dinic(4)
    d.add_edge(0, 1, 2.0)
    d.add_edge(2, 3, 2.0)
    assert d.max_flow(0, 3) == 0.0
    side = d.min_cut_side(0)
    assert 0 in side and 1 in side and 3 not in side


def test_undirected_edges():
    # symmetric capacity lets flow route through either orientation
    d = Dinic(3)
    d.add_edge(1, 0, 4.0, 4.0)
    d.add_edge(1, 2, 4.0, 4.0)
    assert d.max_flow(0, 2) == pytest.approx(4.0)


def test_negative_capacity_rejected():
    d = Dinic(2)
    with pytest.raises(ValueError):
        d.add_edge(0, 1, -1.0)


def test_min_cut_side_separates():
    d = Dinic(4)
    d.add_edge(0, 1, 1.0)
    d.add_edge(1, 2, 5.0)
    d.add_edge(2, 3, 1.0)
    flow = d.max_flow(0, 3)
    side = d.min_cut_side(0)
    assert 0 in side and 3 not in side
    assert flow == pytest.approx(1.0)


def test_random_graphs_match_bipartition_enumeration():
    gen = np.random.default_rng(42)
    for trial in range(40):
        n = int(gen.integers(4, 9))
        edges = []
        d = Dinic(n)
        for u in range(n):
            for v in range(u + 1, n):
                if gen.random() < 0.5:
                    c = float(np.round(gen.uniform(0.1, 4.0), 3))
                    edges.append((u, v, c))
                    d.add_edge(u, v, c, c)
        flow = d.max_flow(0, n - 1)
        want = brute_force_min_cut(n, edges, 0, n - 1)
        assert flow == pytest.approx(want, abs=1e-9), f"trial {trial}"
        # cut side must reproduce the flow value when summed over crossing edges
        side = d.min_cut_side(0)
        cut = sum(c for u, v, c in edges if (u in side) != (v in side))
        assert cut == pytest.approx(flow, abs=1e-9)


def test_large_chain_no_recursion_limit():
    # blocking-flow traversal must cope with paths far beyond the
    # interpreter's recursion depth
    n = 30_000
    d = Dinic(n)
    for i in range(n - 1):
        d.add_edge(i, i + 1, 1.0)
    assert d.max_flow(0, n - 1) == pytest.approx(1.0)


def test_integer_capacities_exact():
    d = Dinic(6)
    caps = [(0, 1, 16), (0, 2, 13), (1, 2, 10), (2, 1, 4), (1, 3, 12),
            (3, 2, 9), (2, 4, 14), (4, 3, 7), (3, 5, 20), (4, 5, 4)]
    for u, v, c in caps:
        d.add_edge(u, v, float(c))
    assert d.max_flow(0, 5) == 23.0
