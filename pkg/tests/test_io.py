from __future__ import annotations

import json

import numpy as np
import pytest

from netreg import Graph
from netreg import io as nio
from netreg.errors import SchemaError
from netreg.motifs import MotifSpec, rooted_k_star


def _write(path, text):
    path.write_text(text)
    return path


def test_graph_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    upper = np.triu(rng.random((15, 15)) < 0.3, 1)
    g = Graph.from_adjacency((upper | upper.T).astype(int))
    p = tmp_path / "g.csv"
    nio.write_graph_csv(g, p)
    assert p.read_text().splitlines()[0] == "src,dst"
    assert nio.read_graph_csv(p, n=15) == g


@pytest.mark.parametrize("text,needle", [
    ("a,b\n0,1\n", "header"),
    ("src,dst\n0,0\n", "self-loop"),
    ("src,dst\n2,1\n", "src < dst"),
    ("src,dst\n0,1\n0,1\n", "duplicate"),
    ("src,dst\n0,x\n", "integer"),
    ("src,dst\n0,1,2\n", "2 fields"),
])
def test_graph_schema_errors(tmp_path, text, needle):
    p = _write(tmp_path / "g.csv", text)
    with pytest.raises(SchemaError) as e:
        nio.read_graph_csv(p)
    assert needle in str(e.value)


def test_graph_ids_beyond_declared_size(tmp_path):
    p = _write(tmp_path / "g.csv", "src,dst\n0,7\n")
    with pytest.raises(SchemaError):
        nio.read_graph_csv(p, n=5)
    assert nio.read_graph_csv(p).n == 8


def test_node_table_with_and_without_node_column(tmp_path):
    a = nio.read_node_table(_write(tmp_path / "a.csv", "y,x\n1,2\n3,4\n"))
    assert a.columns == ("y", "x") and a.values.tolist() == [[1, 2], [3, 4]]
    b = nio.read_node_table(_write(tmp_path / "b.csv", "node,y\n1,5\n0,6\n"))
    assert b.column("y").tolist() == [6.0, 5.0]
    with pytest.raises(SchemaError):
        b.column("z")


@pytest.mark.parametrize("text,n,needle", [
    ("node,y\n0,1\n2,1\n", None, "no row for node 1"),
    ("node,y\n0,1\n1,2\n", 3, "no row for node 2"),
    ("node,y\n0,1\n0,2\n", None, "listed twice"),
    ("y\n1\n2\n", 3, "no row for node 2"),
    ("y\n1\nnan\n", None, "non-finite value for node 1"),
    ("y\n1\nabc\n", None, "expected a number"),
])
def test_node_table_schema_errors(tmp_path, text, n, needle):
    with pytest.raises(SchemaError) as e:
        nio.read_node_table(_write(tmp_path / "t.csv", text), n=n)
    assert needle in str(e.value)


def test_node_table_and_embedding_round_trip_exactly(tmp_path):
    vals = np.random.default_rng(1).normal(size=(6, 3)) / 7.0
    nio.write_node_table(tmp_path / "t.csv", ["a", "b", "c"], vals)
    t = nio.read_node_table(tmp_path / "t.csv")
    assert t.columns == ("a", "b", "c") and np.array_equal(t.values, vals)
    nio.write_embedding_csv(tmp_path / "e.csv", vals)
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "node,z1,z2,z3"
    assert np.array_equal(nio.read_embedding_csv(tmp_path / "e.csv"), vals)


def test_labels_round_trip_and_errors(tmp_path):
    nio.write_labels_csv(tmp_path / "l.csv", ["a", "b", "a"])
    assert nio.read_labels_csv(tmp_path / "l.csv").tolist() == ["a", "b", "a"]
    with pytest.raises(SchemaError) as e:
        nio.read_labels_csv(tmp_path / "l.csv", n=4)
    assert "node 3" in str(e.value)


def test_motif_file_round_trip(tmp_path):
    for m in (rooted_k_star(3), MotifSpec(((0, 1), (1, 2), (2, 0), (2, 3)))):
        nio.write_motif(m, tmp_path / "m.txt")
        assert nio.read_motif(tmp_path / "m.txt") == m


def test_canonical_json():
    text = nio.dumps({"b": np.float64(1.5), "a": np.arange(2), "c": float("inf")})
    assert text.endswith("\n")
    d = json.loads(text)
    assert list(d) == ["a", "b", "c"] and d["a"] == [0, 1] and d["c"] == "inf"
