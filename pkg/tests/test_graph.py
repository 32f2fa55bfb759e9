from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperanf.graph import (
    Graph,
    GraphFormatError,
    gen_clique_path,
    gen_uniform_random,
    load_edge_list,
    load_graph,
)


@st.composite
def small_graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    arcs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n))
    src = [a for a, _ in arcs]
    dst = [b for _, b in arcs]
    return Graph.from_arcs(n, src, dst)


def write(tmp_path, text, name="g.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_empty_file(tmp_path):
    g = load_edge_list(write(tmp_path, ""), symmetrise=False)
    assert g.n == 0 and g.num_arcs == 0


def test_simple_file_with_comments(tmp_path):
    g = load_edge_list(write(tmp_path, "# a comment\n0 1\n\n1\t2\n"))
    assert g.n == 3
    assert g.arc_set() == {(0, 1), (1, 2)}


def test_duplicates_collapse(tmp_path):
    g = load_edge_list(write(tmp_path, "0 1\n0 1\n"))
    assert g.num_arcs == 1 and g.arc_set() == {(0, 1)}


def test_symmetrise(tmp_path):
    g = load_edge_list(write(tmp_path, "0 1\n1 2\n"), symmetrise=True)
    assert g.arc_set() == {(0, 1), (1, 0), (1, 2), (2, 1)}


def test_explicit_node_count(tmp_path):
    g = load_edge_list(write(tmp_path, "0 1\n"), n=5)
    assert g.n == 5
    with pytest.raises(GraphFormatError):
        load_edge_list(write(tmp_path, "0 7\n"), n=5)


@pytest.mark.parametrize(
    "text,lineno",
    [("0 1\n1 x\n", 2), ("0 1 2\n", 1), ("# c\n\n-1 2\n", 3), ("0 99999999999999999999\n", 1)],
)
def test_parse_errors_carry_line_numbers(tmp_path, text, lineno):
    with pytest.raises(GraphFormatError) as info:
        load_edge_list(write(tmp_path, text))
    assert info.value.lineno == lineno
    assert f":{lineno}:" in str(info.value)


def test_self_loops_allowed():
    g = Graph.from_arcs(2, [0, 0], [0, 1])
    assert g.arc_set() == {(0, 0), (0, 1)}


def test_constructor_validation():
    with pytest.raises(ValueError):
        Graph(2, np.array([0, 2, 1]), np.array([1]))
    with pytest.raises(ValueError):
        Graph(2, np.array([0, 1, 2]), np.array([1, 5]))
    with pytest.raises(ValueError):
        Graph(2, np.array([0, 2, 2]), np.array([1, 1]))
    with pytest.raises(ValueError):
        Graph.from_arcs(2, [0], [2])


def test_transpose_small():
    g = Graph.from_arcs(2, [0], [1])
    assert g.transpose().arc_set() == {(1, 0)}


@given(small_graphs())
def test_transpose_involution(g):
    t = g.transpose()
    assert t.num_arcs == g.num_arcs
    assert t.arc_set() == {(b, a) for a, b in g.arc_set()}
    assert t.transpose() == g


def test_transpose_random_large():
    g = gen_uniform_random(5000, 6, seed=3)
    assert g.transpose().num_arcs == g.num_arcs == 30_000


@given(small_graphs())
def test_edge_list_round_trip(g):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "g.txt"
        g.write_edge_list(p)
        back = load_edge_list(p, n=g.n)
        assert back == g
        c = Path(d) / "g.hbg"
        g.save_csr(c)
        assert load_graph(c) == g


def test_csr_cache_layout(tmp_path):
    g = Graph.from_arcs(3, [0, 1, 1], [1, 0, 2])
    data = g.to_csr_bytes()
    assert data[:4] == b"HBG1"
    assert int.from_bytes(data[4:12], "little") == 3
    assert int.from_bytes(data[12:20], "little") == 3
    offs = np.frombuffer(data[20 : 20 + 32], dtype="<i8")
    assert offs.tolist() == [0, 1, 3, 3]
    assert np.frombuffer(data[52:], dtype="<i8").tolist() == [1, 0, 2]
    with pytest.raises(GraphFormatError):
        Graph.from_csr_bytes(data[:-8])
    with pytest.raises(GraphFormatError):
        Graph.from_csr_bytes(b"HBG2" + data[4:])


def test_load_graph_detects_format(tmp_path):
    g = gen_clique_path(3, 2)
    g.save_csr(tmp_path / "g.bin")
    g.write_edge_list(tmp_path / "g.txt")
    assert load_graph(tmp_path / "g.bin") == load_graph(tmp_path / "g.txt") == g


# -- generators --------------------------------------------------------------


@pytest.mark.parametrize("k,l", [(1, 1), (2, 1), (4, 3), (8, 6), (260, 10)])
def test_clique_path_counts(k, l):
    g = gen_clique_path(k, l)
    assert g.n == 2 * k + l
    assert g.num_arcs == 2 * k * (k - 1) + (l - 1) + 2 * k


def test_clique_path_wiring():
    k, l = 3, 2
    arcs = gen_clique_path(k, l).arc_set()
    a, path, b = range(0, 3), [3, 4], range(5, 8)
    assert {(x, y) for x in a for y in a if x != y} <= arcs
    assert {(x, y) for x in b for y in b if x != y} <= arcs
    assert {(x, 3) for x in a} <= arcs
    assert (3, 4) in arcs
    assert {(4, y) for y in b} <= arcs
    assert (4, 3) not in arcs


def test_clique_path_rejects_bad_sizes():
    with pytest.raises(ValueError):
        gen_clique_path(0, 3)
    with pytest.raises(ValueError):
        gen_clique_path(3, 0)


def test_uniform_random_properties():
    g = gen_uniform_random(1000, 8, seed=7)
    assert g.num_arcs == 8000
    assert np.all(g.outdegrees() == 8)
    src, dst = g.arcs()
    assert not np.any(src == dst)
    assert gen_uniform_random(1000, 8, seed=7) == g
    assert gen_uniform_random(1000, 8, seed=8) != g


def test_uniform_random_edge_cases():
    assert gen_uniform_random(10, 0).num_arcs == 0
    assert gen_uniform_random(10, 7.6).num_arcs == 80
    dense = gen_uniform_random(6, 5, seed=1)
    assert dense.num_arcs == 30
    with pytest.raises(ValueError):
        gen_uniform_random(5, 5)
    with pytest.raises(ValueError):
        gen_uniform_random(0, 1)
