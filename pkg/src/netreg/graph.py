"""Immutable simple undirected graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    ``edges`` holds each undirected edge once as a row ``(src, dst)`` with
    ``src < dst``, sorted lexicographically.  The symmetric CSR adjacency and
    the degree vector are derived once at construction.
    """

    n: int
    edges: np.ndarray
    degree: np.ndarray = field(init=False)
    adjacency: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise ConfigurationError("node count must be nonnegative")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise ConfigurationError(f"edge endpoint outside 0..{n - 1}")
            if np.any(e[:, 0] == e[:, 1]):
                i = int(e[e[:, 0] == e[:, 1]][0, 0])
                raise ConfigurationError(f"self-loop at node {i}")
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)
        else:
            e = np.zeros((0, 2), dtype=np.int64)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        adj.sort_indices()
        deg = np.diff(adj.indptr).astype(np.int64)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", _freeze(e))
        object.__setattr__(self, "degree", _freeze(deg))
        object.__setattr__(self, "adjacency", adj)

    # construction helpers -------------------------------------------------
    @classmethod
    def from_adjacency(cls, a) -> "Graph":
        if sp.issparse(a):
            a = sp.triu(a, k=1).tocoo()
            keep = a.data != 0
            return cls(a.shape[0], np.column_stack([a.row[keep], a.col[keep]]))
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigurationError("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise ConfigurationError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ConfigurationError("adjacency must have a zero diagonal")
        i, j = np.nonzero(np.triu(a, k=1))
        return cls(a.shape[0], np.column_stack([i, j]))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        i, j = np.triu_indices(n, k=1)
        return cls(n, np.column_stack([i, j]))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, np.zeros((0, 2), dtype=np.int64))

    # views -----------------------------------------------------------------
    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        nb = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < nb.size and nb[k] == j)

    def induced(self, nodes) -> "Graph":
        """Subgraph induced by ``nodes``, relabelled ``0..len(nodes)-1`` in the given order."""
        nodes = np.asarray(nodes, dtype=np.int64)
        sub = self.adjacency[nodes][:, nodes]
        return Graph.from_adjacency(sub)

    def permute(self, perm) -> "Graph":
        """Relabel node ``i`` as ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if perm.shape != (self.n,) or not np.array_equal(np.sort(perm), np.arange(self.n)):
            raise ConfigurationError("perm must be a permutation of 0..n-1")
        return Graph(self.n, perm[self.edges])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))


def edge_density(g: Graph) -> float:
    """Fraction of the C(n,2) node pairs that are joined by an edge."""
    if g.n < 2:
        raise ConfigurationError("edge density needs at least two nodes")
    return g.n_edges / (g.n * (g.n - 1) / 2.0)
