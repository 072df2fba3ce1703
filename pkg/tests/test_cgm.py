from __future__ import annotations

from collections import Counter

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from cascade_clt.cgm import (
    OddHalfEdgeCount,
    SimpleGraphNotFound,
    build_multigraph,
    edges,
    from_edges,
    is_simple,
    neighbors,
    read_edge_list,
    to_simple,
    write_edge_list,
)
from cascade_clt.dist import NodeSequence


def outcome(mg):
    """'loops' or 'double' for a two-node [2, 2] pairing."""
    e = edges(mg)
    return "loops" if (e[:, 0] == e[:, 1]).all() else "double"


def test_single_edge():
    mg = build_multigraph([1, 1], 0)
    assert edges(mg).tolist() == [[0, 1]]
    assert mg.m == 1


def test_odd_sum():
    with pytest.raises(OddHalfEdgeCount, match="odd half-edge count"):
        build_multigraph([1, 1, 1], 0)


def test_accepts_node_sequence():
    seq = NodeSequence([2, 1, 1], [0, 1, 1])
    assert build_multigraph(seq, 4).degrees.tolist() == [2, 1, 1]


@given(st.lists(st.integers(0, 6), min_size=1, max_size=40), st.integers(0, 2**32))
def test_matching_invariants(degrees, seed):
    if sum(degrees) % 2:
        degrees = degrees + [1]
    mg = build_multigraph(degrees, seed)
    h = np.arange(2 * mg.m)
    assert np.array_equal(mg.mate[mg.mate], h)
    assert not (mg.mate == h).any()
    assert np.array_equal(np.bincount(mg.half_edge_owner, minlength=mg.n), degrees)
    assert 2 * mg.m == sum(degrees)
    again = build_multigraph(degrees, seed)
    assert np.array_equal(again.mate, mg.mate)


def test_two_by_two_frequencies():
    # the three matchings of four half-edges: one gives two loops, two give a double edge
    rng = np.random.default_rng(2024)
    trials = 100_000
    loops = sum(outcome(build_multigraph([2, 2], rng)) == "loops" for _ in range(trials))
    assert abs(loops / trials - 1 / 3) < 0.01


def test_four_leaves_uniform():
    rng = np.random.default_rng(5)
    c = Counter(tuple(map(tuple, np.sort(edges(build_multigraph([1, 1, 1, 1], rng)), axis=1)
                      .tolist())) for _ in range(30_000))
    assert len(c) == 3
    for v in c.values():
        assert abs(v / 30_000 - 1 / 3) < 0.015


class TestToSimple:
    def test_already_simple(self):
        mg = from_edges(3, [(0, 1), (1, 2)])
        out, attempts = to_simple(mg)
        assert out is mg and attempts == 1

    def test_reject_impossible(self):
        with pytest.raises(SimpleGraphNotFound) as exc:
            to_simple(build_multigraph([2, 2], 1), max_retries=50, seed=0)
        assert exc.value.attempts == 50

    def test_erase_two_by_two(self):
        seen = set()
        for seed in range(40):
            mg = build_multigraph([2, 2], seed)
            out, _ = to_simple(mg, "erase")
            assert is_simple(out)
            seen.add((outcome(mg), tuple(map(tuple, edges(out).tolist()))))
        assert seen == {("loops", ()), ("double", ((0, 1),))}

    def test_reject_gives_simple_same_degrees(self):
        degrees = [3] * 20
        out, attempts = to_simple(build_multigraph(degrees, 9), seed=3)
        assert is_simple(out) and attempts >= 1
        assert out.degrees.tolist() == degrees

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            to_simple(from_edges(2, [(0, 1)]), "merge")


class TestNeighbors:
    def test_single_edge(self):
        assert neighbors(from_edges(2, [(0, 1)]), 0) == [1]

    def test_loop(self):
        assert neighbors(from_edges(1, [(0, 0)]), 0) == [0, 0]

    def test_double_edge(self):
        assert neighbors(from_edges(2, [(0, 1), (0, 1)]), 0) == [1, 1]

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            neighbors(from_edges(2, [(0, 1)]), 2)


def test_neighbors_match_networkx():
    mg = build_multigraph([3, 2, 2, 1, 4, 2], 11)
    g = nx.MultiGraph()
    g.add_nodes_from(range(mg.n))
    g.add_edges_from(edges(mg).tolist())
    for i in range(mg.n):
        nbrs = []
        for _, v, _k in g.edges(i, keys=True):
            nbrs.append(v)
        # networkx reports a loop once; the half-edge view sees it twice
        loops = sum(1 for v in nbrs if v == i)
        assert neighbors(mg, i) == sorted(nbrs + [i] * loops)


def test_edge_list_roundtrip(tmp_path):
    mg = build_multigraph([2, 3, 1, 2, 0, 2], 3)
    path = tmp_path / "edges.csv"
    write_edge_list(mg, path)
    back = read_edge_list(path, mg.n)
    assert back.degrees.tolist() == mg.degrees.tolist()
    key = lambda g: sorted(map(tuple, np.sort(edges(g), axis=1).tolist()))  # noqa: E731
    assert key(back) == key(mg)
    assert path.read_text().splitlines()[0] == "u,v"
