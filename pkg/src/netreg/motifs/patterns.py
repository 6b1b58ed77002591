"""Small subgraph patterns and their canonical forms."""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional

from ..errors import ComplexityError, ConfigurationError

MAX_PATTERN_VERTICES = 8


def _normalize_edges(edges: Iterable) -> tuple:
    out = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ConfigurationError(f"pattern has a self-loop at {u}")
        out.add((min(u, v), max(u, v)))
    return tuple(sorted(out))


def _relabel(edges: tuple, perm) -> tuple:
    return tuple(sorted((min(perm[u], perm[v]), max(perm[u], perm[v])) for u, v in edges))


@lru_cache(maxsize=4096)
def canonical_edges(edges: tuple, r: int, rooted: bool) -> tuple:
    """Lexicographically minimal edge tuple over all relabelings of ``0..r-1``
    (relabelings fixing vertex 0 when ``rooted``)."""
    best = None
    if rooted:
        perms = ((0,) + p for p in itertools.permutations(range(1, r)))
    else:
        perms = itertools.permutations(range(r))
    for p in perms:
        cand = _relabel(edges, p)
        if best is None or cand < best:
            best = cand
    return best


@lru_cache(maxsize=4096)
def automorphism_count(edges: tuple, r: int, rooted: bool) -> int:
    es = set(edges)
    count = 0
    if rooted:
        perms = ((0,) + p for p in itertools.permutations(range(1, r)))
    else:
        perms = itertools.permutations(range(r))
    for p in perms:
        if set(_relabel(edges, p)) == es:
            count += 1
    return count


def _degrees(edges, r):
    deg = [0] * r
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    return deg


def _connected(edges, r) -> bool:
    adj = {i: set() for i in range(r)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen, stack = {0}, [0]
    while stack:
        x = stack.pop()
        for y in adj[x] - seen:
            seen.add(y)
            stack.append(y)
    return len(seen) == r


@dataclass(frozen=True)
class MotifSpec:
    """Connected pattern on vertices ``0..r-1`` stored in canonical form.

    For rooted patterns the root is vertex 0 and canonicalization only
    permutes the remaining vertices.
    """

    edges: tuple
    rooted: bool = False
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        e = _normalize_edges(self.edges)
        if not e:
            raise ConfigurationError("pattern needs at least one edge")
        verts = sorted({x for uv in e for x in uv})
        if self.rooted and 0 not in verts:
            raise ConfigurationError("rooted pattern must contain its root vertex 0")
        if not self.rooted:
            mapping = {v: i for i, v in enumerate(verts)}
        else:
            rest = [v for v in verts if v != 0]
            mapping = {0: 0, **{v: i + 1 for i, v in enumerate(rest)}}
        e = tuple(sorted((min(mapping[u], mapping[v]), max(mapping[u], mapping[v])) for u, v in e))
        r = len(verts)
        if not _connected(e, r):
            raise ConfigurationError("pattern must be connected")
        deg = _degrees(e, r)
        centre = deg.index(max(deg))
        if len(e) == r - 1 and deg[centre] == r - 1 and (not self.rooted or centre == 0 or r == 2):
            # stars have an obvious canonical form; no search needed
            canon = _star_edges(r - 1)
        elif r > MAX_PATTERN_VERTICES:
            raise ComplexityError(f"non-star patterns are limited to {MAX_PATTERN_VERTICES} vertices")
        else:
            canon = canonical_edges(e, r, bool(self.rooted))
        object.__setattr__(self, "edges", canon)

    # derived quantities ----------------------------------------------------
    @property
    def r(self) -> int:
        return 1 + max(v for uv in self.edges for v in uv)

    @property
    def s(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> list:
        return _degrees(self.edges, self.r)

    @property
    def automorphisms(self) -> int:
        k = self.star_order()
        if k is not None:
            # leaves permute freely; an unrooted edge can also swap its ends
            return 2 if (k == 1 and not self.rooted) else math.factorial(k)
        return automorphism_count(self.edges, self.r, self.rooted)

    @property
    def iso_count(self) -> int:
        """Number of distinct copies of the pattern on a fixed labelled vertex set
        (with the root position fixed for rooted patterns)."""
        free = self.r - 1 if self.rooted else self.r
        return math.factorial(free) // self.automorphisms

    @property
    def klass(self) -> str:
        if self.s == self.r - 1:
            return "acyclic"
        if self.s == self.r and all(d == 2 for d in self.degrees):
            return "simple-cycle"
        return "general-cyclic"

    # shape predicates ------------------------------------------------------
    def star_order(self) -> Optional[int]:
        """``k`` when the pattern is a ``k``-star (unrooted, or rooted at its centre)."""
        if self.s != self.r - 1:
            return None
        deg = self.degrees
        if self.rooted:
            return self.s if deg[0] == self.s else None
        if self.s == 1 or max(deg) == self.s:
            return self.s
        return None

    @property
    def is_edge(self) -> bool:
        return not self.rooted and self.s == 1

    @property
    def is_triangle(self) -> bool:
        return not self.rooted and self.r == 3 and self.s == 3

    @property
    def is_rooted_star(self) -> bool:
        return self.rooted and self.star_order() is not None

    @property
    def is_unrooted_star(self) -> bool:
        return not self.rooted and self.star_order() is not None

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        k = self.star_order()
        if self.rooted and k is not None:
            return f"rooted_k_star({k})"
        if self.is_edge:
            return "edge"
        if k is not None:
            return "two_star" if k == 2 else f"k_star({k})"
        if self.is_triangle:
            return "triangle"
        if self.klass == "simple-cycle":
            return f"cycle({self.r})"
        if not self.rooted and self.klass == "acyclic" and max(self.degrees) <= 2:
            return f"path({self.s})"
        return "pattern[" + " ".join(f"{u}-{v}" for u, v in self.edges) + "]"

    # serialization ---------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"{u} {v}" for u, v in self.edges]
        if self.rooted:
            lines.append("root 0")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, name: Optional[str] = None) -> "MotifSpec":
        edges, root = [], None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "root":
                if len(parts) != 2 or root is not None:
                    raise ConfigurationError(f"line {lineno}: malformed root line")
                root = int(parts[1])
                continue
            if len(parts) != 2:
                raise ConfigurationError(f"line {lineno}: expected 'u v'")
            edges.append((int(parts[0]), int(parts[1])))
        if root is None:
            return cls(tuple(edges), False, name)
        # move the root to label 0
        swap = lambda x: 0 if x == root else (root if x == 0 else x)
        return cls(tuple((swap(u), swap(v)) for u, v in edges), True, name)

    def to_dict(self) -> dict:
        return {"label": self.label, "r": self.r, "edges": [list(e) for e in self.edges], "rooted": self.rooted}

    def __repr__(self):
        return f"MotifSpec({self.label})"


def _star_edges(k: int) -> tuple:
    return tuple((0, i) for i in range(1, k + 1))


def k_star(k: int) -> MotifSpec:
    if k < 1:
        raise ConfigurationError("star order must be at least 1")
    return MotifSpec(_star_edges(k))


def rooted_k_star(k: int) -> MotifSpec:
    if k < 1:
        raise ConfigurationError("star order must be at least 1")
    return MotifSpec(_star_edges(k), rooted=True)


def cycle(length: int) -> MotifSpec:
    if length < 3:
        raise ConfigurationError("cycle length must be at least 3")
    return MotifSpec(tuple((i, (i + 1) % length) for i in range(length)))


def path(n_edges: int) -> MotifSpec:
    return MotifSpec(tuple((i, i + 1) for i in range(n_edges)))


_NAME_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*(\d+)\s*\))?\s*$")


def builtin_motif(name: str, k: Optional[int] = None) -> MotifSpec:
    """Named pattern: ``edge``, ``two_star``, ``k_star``, ``triangle``, ``cycle``,
    ``rooted_k_star``, ``rooted_two_star``, ``path``.  The size parameter may be
    passed as ``k`` or inline, e.g. ``"k_star(3)"``."""
    m = _NAME_RE.match(name)
    if not m:
        raise ConfigurationError(f"unsupported motif name {name!r}")
    base, inline = m.group(1), m.group(2)
    if inline is not None:
        if k is not None and int(inline) != k:
            raise ConfigurationError(f"conflicting sizes for {name!r}")
        k = int(inline)
    if base == "edge":
        return k_star(1)
    if base == "two_star":
        return k_star(2)
    if base == "triangle":
        return cycle(3)
    if base == "rooted_two_star":
        return rooted_k_star(2)
    if base in ("k_star", "rooted_k_star", "cycle", "path"):
        if k is None:
            raise ConfigurationError(f"{base} needs a size parameter")
        return {"k_star": k_star, "rooted_k_star": rooted_k_star, "cycle": cycle, "path": path}[base](k)
    raise ConfigurationError(f"unsupported motif name {name!r}")
