"""Decomposition of products of local frequencies into merged-pattern counts.

For patterns ``R_j`` and ``R_k`` the node average of ``Q_i(R_j) Q_i(R_k)`` is
an exact linear combination of global frequencies of the patterns obtained by
overlaying a copy of ``R_j`` and a copy of ``R_k`` that share ``c`` vertices
and ``d`` edges.  The one-shared-vertex classes form the leading term; all
other classes form the remainder, whose coefficients are kept exact here.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from ..errors import CapabilityError, ComplexityError, ConfigurationError
from ..graph import Graph
from .counting import count_global, count_local
from .patterns import MAX_PATTERN_VERTICES, MotifSpec, k_star, rooted_k_star

import numpy as np

MODES = ("leading_only", "full")


@dataclass(frozen=True)
class MergeClass:
    """Isomorphism class ``motif`` of overlays sharing ``c`` vertices and ``d`` edges.

    ``multiplicity`` is the number of ordered copy pairs on one fixed vertex
    layout producing the class, and ``weight`` its normalized constant.
    """

    c: int
    d: int
    motif: MotifSpec
    multiplicity: int
    weight: float


@dataclass(frozen=True, eq=False)
class MotifDecomposition:
    pair: tuple
    classes: tuple
    mode: str
    kind: str  # "generic" or "rooted_star"

    @property
    def leading(self) -> list:
        return [(cl.motif, cl.weight) for cl in self.classes if cl.c == 1]

    @property
    def remainder(self) -> list:
        return [(cl.c, cl.d, cl.motif, cl.weight) for cl in self.classes if cl.c > 1]

    def coefficient(self, cl: MergeClass, n: int, rho_hat: float) -> float:
        """Exact finite-``n`` coefficient of ``Q(cl.motif)`` in the node average
        of the product of the two local frequencies."""
        mj, mk = self.pair
        if self.kind == "rooted_star":
            k, l = mj.s, mk.s
            cp = cl.c - 1
            u = k + l - cp
            ways = math.factorial(u) // (math.factorial(cp) * math.factorial(k - cp) * math.factorial(l - cp))
            frac = math.comb(n - 1, u) / (math.comb(n - 1, k) * math.comb(n - 1, l))
            return ways * frac * rho_hat ** (-cp)
        r = mj.r + mk.r - cl.c
        layouts = r * math.comb(r - 1, cl.c - 1) * math.comb(r - cl.c, mj.r - cl.c)
        num = layouts * cl.multiplicity * math.comb(n, r)
        den = n * math.comb(n - 1, mj.r - 1) * math.comb(n - 1, mk.r - 1) * mj.iso_count * mk.iso_count
        return (num / den) * rho_hat ** (-cl.d)

    def to_ledger(self) -> list:
        out = []
        for cl in self.classes:
            out.append({
                "motif": cl.motif.label, "edges": [list(e) for e in cl.motif.edges],
                "weight": cl.weight, "iso_count": cl.motif.iso_count,
                "c": cl.c, "d": cl.d, "multiplicity": cl.multiplicity,
            })
        return out

    def to_json(self) -> str:
        return json.dumps({
            "pair": [m.label for m in self.pair], "mode": self.mode,
            "leading": [e for e in self.to_ledger() if e["c"] == 1],
            "remainder": [e for e in self.to_ledger() if e["c"] > 1],
        }, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# brute-force overlay enumeration
# ---------------------------------------------------------------------------

def _copies_on(m: MotifSpec, verts: list) -> list:
    """All distinct edge sets of copies of ``m`` on the labelled vertex list."""
    seen = set()
    for p in itertools.permutations(verts):
        seen.add(frozenset((min(p[u], p[v]), max(p[u], p[v])) for u, v in m.edges))
    return sorted(seen, key=lambda s: sorted(s))


def _invariant(edges, r):
    deg = [0] * r
    nb = [set() for _ in range(r)]
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
        nb[u].add(v)
        nb[v].add(u)
    nbdeg = tuple(sorted((deg[v], tuple(sorted(deg[w] for w in nb[v]))) for v in range(r)))
    return (len(edges), nbdeg)


def _isomorphic(e1, e2, r) -> bool:
    """Backtracking isomorphism test for small graphs with equal invariants."""
    adj1 = [set() for _ in range(r)]
    adj2 = [set() for _ in range(r)]
    for u, v in e1:
        adj1[u].add(v)
        adj1[v].add(u)
    for u, v in e2:
        adj2[u].add(v)
        adj2[v].add(u)
    order = sorted(range(r), key=lambda v: -len(adj1[v]))
    image = {}
    used = set()

    def extend(t):
        if t == r:
            return True
        v = order[t]
        for w in range(r):
            if w in used or len(adj2[w]) != len(adj1[v]):
                continue
            if all((image[x] in adj2[w]) == (x in adj1[v]) for x in image):
                image[v] = w
                used.add(w)
                if extend(t + 1):
                    return True
                del image[v]
                used.discard(w)
        return False

    return extend(0)


def _generic_classes(mj: MotifSpec, mk: MotifSpec, mode: str) -> tuple:
    rj, rk = mj.r, mk.r
    if rj + rk - 1 > MAX_PATTERN_VERTICES:
        raise ComplexityError(
            f"merging {mj.label} and {mk.label} needs {rj + rk - 1} vertices; "
            f"the brute-force path is capped at r_j + r_k - 1 <= {MAX_PATTERN_VERTICES}"
        )
    iso = mj.iso_count * mk.iso_count
    cmax = 1 if mode == "leading_only" else min(rj, rk)
    Vj = list(range(rj))
    copies_j = _copies_on(mj, Vj)
    classes = []
    for c in range(1, cmax + 1):
        r = rj + rk - c
        Vk = list(range(c)) + list(range(rj, rj + rk - c))
        copies_k = _copies_on(mk, Vk)
        # representatives per (d, invariant): list of [edges, count]
        reps = defaultdict(list)
        for ej in copies_j:
            for ek in copies_k:
                union = tuple(sorted(ej | ek))
                d = len(ej & ek)
                bucket = reps[(d, _invariant(union, r))]
                for item in bucket:
                    if _isomorphic(union, item[0], r):
                        item[1] += 1
                        break
                else:
                    bucket.append([union, 1])
        found = []
        total = 0
        for (d, _), bucket in reps.items():
            for union, cnt in bucket:
                total += cnt
                found.append(MergeClass(c, d, MotifSpec(union), cnt, cnt / iso))
        if total != iso:  # pragma: no cover - internal consistency
            raise RuntimeError("overlay multiplicities do not add up")
        found.sort(key=lambda cl: (cl.d, cl.motif.edges))
        classes.extend(found)
    return tuple(classes)


def _rooted_classes(k: int, l: int, mode: str) -> tuple:
    cmax = 0 if mode == "leading_only" else min(k, l)
    out = []
    for cp in range(cmax + 1):
        u = k + l - cp
        mult = math.factorial(k) * math.factorial(l) // (
            math.factorial(cp) * math.factorial(k - cp) * math.factorial(l - cp))
        out.append(MergeClass(cp + 1, cp, k_star(u), mult, float(mult)))
    return tuple(out)


def merge_motifs(mj: MotifSpec, mk: MotifSpec, mode: str = "leading_only") -> MotifDecomposition:
    """Classes of overlays of ``mj`` and ``mk``.

    Rooted stars (an edge counts as a rooted 1-star when paired with one) are
    merged in closed form with no size cap; a rooted star sharing its root with
    a rooted ``l``-star over ``c'`` common leaves gives a ``(k+l-c')``-star.
    Unrooted patterns are merged by brute-force enumeration of copy pairs on a
    fixed vertex layout.
    """
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}")
    if mj.rooted or mk.rooted:
        a = rooted_k_star(1) if mj.is_edge else mj
        b = rooted_k_star(1) if mk.is_edge else mk
        if not (a.is_rooted_star and b.is_rooted_star):
            raise CapabilityError(
                f"cannot merge {mj.label} with {mk.label}: rooted patterns merge only with rooted stars or edges")
        return MotifDecomposition((a, b), _rooted_classes(a.s, b.s, mode), mode, "rooted_star")
    return MotifDecomposition((mj, mk), _generic_classes(mj, mk, mode), mode, "generic")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def leading_term(g: Graph, dec: MotifDecomposition, rho_hat: float) -> float:
    """``sum_M C^M Q(M)`` over the one-shared-vertex classes."""
    lead = dec.leading
    if not lead:
        raise ConfigurationError("decomposition has no leading classes")
    return math.fsum(w * count_global(g, M, rho_hat) for M, w in lead)


def decomposition_terms(g: Graph, dec: MotifDecomposition, rho_hat: float) -> tuple:
    """``(S, R)`` with ``R`` the exact remainder, including the finite-``n``
    difference between the leading constants and their exact coefficients."""
    if dec.mode != "full":
        dec = merge_motifs(dec.pair[0], dec.pair[1], "full")
    n = g.n
    S = leading_term(g, dec, rho_hat)
    exact = [dec.coefficient(cl, n, rho_hat) * count_global(g, cl.motif, rho_hat) for cl in dec.classes]
    return S, math.fsum(exact) - S


def quadratic_identity_check(g: Graph, mj: MotifSpec, mk: MotifSpec, rho_hat: float) -> float:
    """``|mean_i Q_i(mj) Q_i(mk) - (S + R)|`` with exact remainder coefficients."""
    dec = merge_motifs(mj, mk, "full")
    zj = count_local(g, mj, rho_hat).values
    zk = count_local(g, mk, rho_hat).values
    lhs = math.fsum(zj * zk) / g.n
    S, R = decomposition_terms(g, dec, rho_hat)
    return abs(lhs - (S + R))
