"""Readers and writers for the on-disk formats.

* graphs: CSV edge list, header ``src,dst``, 0-based ids, each undirected edge
  once with ``src < dst``;
* node tables (covariates and response): CSV with a header row; row ``i`` is
  node ``i``, or an explicit ``node`` column gives the ids;
* embeddings: CSV ``node,z1,...,zd``;
* block labels: CSV ``node,block``;
* motifs: ``u v`` lines with an optional ``root u`` line.

Floats are written with ``repr`` so files round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import SchemaError
from .graph import Graph
from .motifs.patterns import MotifSpec


def _fmt(v) -> str:
    return repr(float(v))


def _open_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise SchemaError(f"{path}: empty file")
    return [c.strip() for c in rows[0]], [[c.strip() for c in r] for r in rows[1:]]


def _int(text: str, where: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise SchemaError(f"{where}: expected an integer, got {text!r}") from None
    return v


def _float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"{where}: expected a number, got {text!r}") from None


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------

def write_graph_csv(g: Graph, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        w.writerows(g.edges.tolist())


def read_graph_csv(path, n: Optional[int] = None) -> Graph:
    """Read an edge list; ``n`` defaults to one more than the largest id."""
    header, rows = _open_rows(path)
    if header != ["src", "dst"]:
        raise SchemaError(f"{path}: header must be 'src,dst', got {','.join(header)!r}")
    edges = []
    for k, r in enumerate(rows, start=2):
        if len(r) != 2:
            raise SchemaError(f"{path}:{k}: expected 2 fields, got {len(r)}")
        u, v = _int(r[0], f"{path}:{k}"), _int(r[1], f"{path}:{k}")
        if u < 0 or v < 0:
            raise SchemaError(f"{path}:{k}: node ids must be nonnegative")
        if u == v:
            raise SchemaError(f"{path}:{k}: self-loop at node {u}")
        if u > v:
            raise SchemaError(f"{path}:{k}: edge ({u},{v}) must be listed with src < dst")
        edges.append((u, v))
    if len(set(edges)) != len(edges):
        raise SchemaError(f"{path}: duplicate edges")
    top = max((v for _, v in edges), default=-1) + 1
    if n is None:
        n = top
    elif top > n:
        raise SchemaError(f"{path}: node id {top - 1} outside 0..{n - 1}")
    return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2))


# ---------------------------------------------------------------------------
# node tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NodeTable:
    columns: tuple
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise SchemaError(f"no column {name!r}; have {list(self.columns)}")
        return self.values[:, self.columns.index(name)]

    def select(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.column(c) for c in names]) if names else np.zeros((self.n, 0))


def read_node_table(path, n: Optional[int] = None) -> NodeTable:
    """Read a numeric node table.

    With a ``node`` column every id in ``0..n-1`` must appear exactly once
    (``n`` defaults to the larger of the row count and the largest id plus
    one); rows are reordered by id.
    """
    header, rows = _open_rows(path)
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names")
    width = len(header)
    for k, r in enumerate(rows, start=2):
        if len(r) != width:
            raise SchemaError(f"{path}:{k}: expected {width} fields, got {len(r)}")
    if "node" in header:
        j = header.index("node")
        ids = [_int(r[j], f"{path}:{k}") for k, r in enumerate(rows, start=2)]
        size = max(len(rows), max(ids, default=-1) + 1) if n is None else n
        seen = {}
        for k, i in enumerate(ids):
            if not 0 <= i < size:
                raise SchemaError(f"{path}: node {i} outside 0..{size - 1}")
            if i in seen:
                raise SchemaError(f"{path}: node {i} listed twice")
            seen[i] = k
        missing = [i for i in range(size) if i not in seen]
        if missing:
            raise SchemaError(f"{path}: no row for node {missing[0]}"
                              + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""))
        rows = [rows[seen[i]] for i in range(size)]
        cols = [c for c in header if c != "node"]
        idx = [header.index(c) for c in cols]
    else:
        if n is not None and len(rows) < n:
            raise SchemaError(f"{path}: no row for node {len(rows)} ({len(rows)} rows, {n} nodes)")
        if n is not None and len(rows) > n:
            raise SchemaError(f"{path}: {len(rows)} rows but only {n} nodes")
        cols, idx = header, list(range(width))
    vals = np.array([[_float(r[j], f"{path}:{k + 2} column {header[j]!r}") for j in idx]
                     for k, r in enumerate(rows)], dtype=float).reshape(len(rows), len(cols))
    bad = np.argwhere(~np.isfinite(vals))
    if bad.size:
        i, j = bad[0]
        raise SchemaError(f"{path}: non-finite value for node {i}, column {cols[j]!r}")
    return NodeTable(tuple(cols), vals)


def write_node_table(path, columns: Sequence[str], values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float).reshape(len(values), -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node"] + list(columns))
        for i, row in enumerate(values):
            w.writerow([i] + [_fmt(v) for v in row])


def write_embedding_csv(path, Zhat: np.ndarray) -> None:
    Zhat = np.asarray(Zhat).reshape(len(Zhat), -1)
    write_node_table(path, [f"z{j + 1}" for j in range(Zhat.shape[1])], Zhat)


def read_embedding_csv(path) -> np.ndarray:
    return read_node_table(path).values


def read_labels_csv(path, n: Optional[int] = None) -> np.ndarray:
    header, rows = _open_rows(path)
    if header != ["node", "block"]:
        raise SchemaError(f"{path}: header must be 'node,block', got {','.join(header)!r}")
    table = {}
    for k, r in enumerate(rows, start=2):
        if len(r) != 2:
            raise SchemaError(f"{path}:{k}: expected 2 fields, got {len(r)}")
        i = _int(r[0], f"{path}:{k}")
        if i in table:
            raise SchemaError(f"{path}: node {i} listed twice")
        table[i] = r[1]
    size = len(table) if n is None else n
    for i in range(size):
        if i not in table:
            raise SchemaError(f"{path}: no block label for node {i}")
    extra = [i for i in table if not 0 <= i < size]
    if extra:
        raise SchemaError(f"{path}: node {extra[0]} outside 0..{size - 1}")
    return np.array([table[i] for i in range(size)], dtype=object)


def write_labels_csv(path, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "block"])
        for i, b in enumerate(labels):
            w.writerow([i, b])


# ---------------------------------------------------------------------------
# motifs and JSON
# ---------------------------------------------------------------------------

def read_motif(path) -> MotifSpec:
    return MotifSpec.from_text(Path(path).read_text())


def write_motif(m: MotifSpec, path) -> None:
    Path(path).write_text(m.to_text())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, numpy converted, non-finite floats as strings."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))
