"""Normalized global and local subgraph frequencies.

Copies of a pattern are non-induced: a copy is a set of graph edges forming a
subgraph isomorphic to the pattern.  Edges, stars and triangles use degree
and adjacency closed forms.  Other patterns are counted exactly through
inclusion-exclusion over vertex-identification quotients, where each quotient
contributes a homomorphism count evaluated as a tensor contraction of the
adjacency matrix.
"""

from __future__ import annotations

import math
import string
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import CapabilityError, DegenerateGraphError
from ..graph import Graph
from .patterns import MotifSpec

GENERIC_COST_WARN = 1e9


class GenericCountWarning(RuntimeWarning):
    """Emitted when a pattern without a closed form is counted on a large graph."""


def binom(d, k: int) -> np.ndarray:
    """Elementwise C(d, k) for integer arrays ``d``; zero when ``d < k``.

    Computed as a falling factorial divided by ``k!``, exact in floating point
    whenever the falling factorial stays below 2**53.
    """
    d = np.asarray(d, dtype=np.float64)
    if k < 0:
        return np.zeros_like(d)
    out = np.ones_like(d)
    for t in range(k):
        out = out * (d - t)
    out = out / math.factorial(k)
    return np.where(d >= k, out, 0.0)


def _check_rho(rho_hat: float):
    if not (rho_hat > 0) or not math.isfinite(rho_hat):
        raise DegenerateGraphError(f"density estimate must be positive, got {rho_hat}")


def _check_size(g: Graph, m: MotifSpec):
    if m.r > g.n:
        raise DegenerateGraphError(f"pattern has {m.r} vertices but the graph only {g.n}")


@dataclass(frozen=True, eq=False)
class LocalCounts:
    """Per-node normalized frequencies and the normalization that produced them."""

    motif: MotifSpec
    values: np.ndarray
    rho_hat: float
    exponent: int
    denominator: float

    def mean(self) -> float:
        return math.fsum(self.values) / self.values.size

    def __len__(self):
        return self.values.size


# ---------------------------------------------------------------------------
# exact copy counts
# ---------------------------------------------------------------------------

def _triangles_per_node(g: Graph) -> np.ndarray:
    A = g.adjacency
    return np.asarray((A @ A).multiply(A).sum(axis=1)).ravel() / 2.0


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


@lru_cache(maxsize=512)
def _quotient_terms(edges: tuple, r: int):
    """Inclusion-exclusion terms ``(mu, quotient_edges, n_blocks, block_of)``.

    Summing ``mu * hom(quotient)`` over all vertex partitions without an edge
    inside a block gives the number of injective edge-preserving maps.
    """
    terms = []
    for part in _set_partitions(list(range(r))):
        block_of = [0] * r
        for b, blk in enumerate(part):
            for v in blk:
                block_of[v] = b
        if any(block_of[u] == block_of[v] for u, v in edges):
            continue
        qe = tuple(sorted({(min(block_of[u], block_of[v]), max(block_of[u], block_of[v])) for u, v in edges}))
        mu = 1
        for blk in part:
            mu *= (-1) ** (len(blk) - 1) * math.factorial(len(blk) - 1)
        terms.append((mu, qe, len(part), tuple(block_of)))
    return tuple(terms)


def _hom(A: np.ndarray, qedges: tuple, nb: int, free=None):
    letters = string.ascii_letters[:nb]
    subs = ",".join(letters[u] + letters[v] for u, v in qedges)
    out = letters[free] if free is not None else ""
    return np.einsum(subs + "->" + out, *([A] * len(qedges)), optimize="greedy")


def _generic_counts(g: Graph, m: MotifSpec, local: bool):
    n = g.n
    if float(n) ** m.r > GENERIC_COST_WARN:
        warnings.warn(
            f"counting {m.label} without a closed form costs up to O(n^{m.r}) at n={n}",
            GenericCountWarning, stacklevel=3,
        )
    A = g.dense()
    terms = _quotient_terms(m.edges, m.r)
    if not local:
        total = math.fsum(mu * float(_hom(A, qe, nb)) for mu, qe, nb, _ in terms)
        return total / m.automorphisms
    acc = np.zeros(n)
    for mu, qe, nb, block_of in terms:
        # every pattern vertex can be the one mapped to node i
        mult = np.bincount(np.asarray(block_of), minlength=nb)
        for b in range(nb):
            acc += (mu * mult[b]) * _hom(A, qe, nb, free=b)
    return acc / m.automorphisms


def copies_containing(g: Graph, m: MotifSpec) -> np.ndarray:
    """Number of copies of ``m`` (unrooted) that contain each node."""
    if m.rooted:
        raise CapabilityError("use rooted counts for rooted patterns")
    k = m.star_order()
    deg = g.degree
    if m.is_edge:
        return deg.astype(np.float64)
    if k is not None:
        leaf = g.adjacency @ binom(deg - 1, k - 1)
        return binom(deg, k) + leaf
    if m.is_triangle:
        return _triangles_per_node(g)
    return _generic_counts(g, m, local=True)


def copies_total(g: Graph, m: MotifSpec) -> float:
    """Number of copies of ``m`` in ``g``."""
    if m.rooted:
        k = m.star_order()
        if k is None:
            raise CapabilityError("only rooted stars are supported")
        return math.fsum(binom(g.degree, k))
    k = m.star_order()
    if m.is_edge:
        return float(g.n_edges)
    if k is not None:
        return math.fsum(binom(g.degree, k))
    if m.is_triangle:
        return math.fsum(_triangles_per_node(g)) / 3.0
    return _generic_counts(g, m, local=False)


# ---------------------------------------------------------------------------
# normalized frequencies
# ---------------------------------------------------------------------------

def count_global(g: Graph, m: MotifSpec, rho_hat: float) -> float:
    """Copies of ``m`` divided by ``C(n, r) * rho_hat**s * |Iso(m)|``.

    For a rooted star this is the node average of the rooted local counts,
    which coincides with the value for the unrooted star.
    """
    _check_rho(rho_hat)
    _check_size(g, m)
    if m.rooted:
        k = m.star_order()
        if k is None:
            raise CapabilityError("only rooted stars are supported")
        return copies_total(g, m) / (g.n * math.comb(g.n - 1, k) * rho_hat ** k)
    denom = math.comb(g.n, m.r) * rho_hat ** m.s * m.iso_count
    return copies_total(g, m) / denom


def count_local(g: Graph, m: MotifSpec, rho_hat: float) -> LocalCounts:
    """Per-node copies containing the node divided by ``C(n-1, r-1) rho_hat**s |Iso(m)|``.

    Rooted stars are dispatched to :func:`count_local_rooted`.
    """
    if m.rooted:
        return count_local_rooted(g, m, rho_hat)
    _check_rho(rho_hat)
    _check_size(g, m)
    denom = math.comb(g.n - 1, m.r - 1) * m.iso_count
    vals = copies_containing(g, m) / (denom * rho_hat ** m.s)
    return LocalCounts(m, vals, rho_hat, m.s, float(denom))


def count_local_rooted(g: Graph, star: MotifSpec, rho_hat: float) -> LocalCounts:
    """``C(deg(i), k) / (C(n-1, k) rho_hat**k)`` for a rooted ``k``-star."""
    if not star.is_rooted_star:
        raise CapabilityError(f"{star.label} is not a rooted star")
    _check_rho(rho_hat)
    _check_size(g, star)
    k = star.s
    denom = math.comb(g.n - 1, k)
    vals = binom(g.degree, k) / (denom * rho_hat ** k)
    return LocalCounts(star, vals, rho_hat, k, float(denom))


def local_values(g: Graph, m: MotifSpec, rho_hat: float) -> np.ndarray:
    return count_local(g, m, rho_hat).values
