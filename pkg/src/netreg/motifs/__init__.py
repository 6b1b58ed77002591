"""Subgraph patterns, normalized frequencies, merge decompositions and
per-node projections."""

from .counting import (
    GenericCountWarning, LocalCounts, binom, copies_containing, copies_total,
    count_global, count_local, count_local_rooted,
)
from .decompose import (
    MergeClass, MotifDecomposition, decomposition_terms, leading_term, merge_motifs,
    quadratic_identity_check,
)
from .hajek import HajekTable, hajek_projection, supports_kernel, weighted_projection
from .patterns import MotifSpec, builtin_motif, cycle, k_star, path, rooted_k_star

__all__ = [
    "MotifSpec", "builtin_motif", "k_star", "rooted_k_star", "cycle", "path",
    "LocalCounts", "count_global", "count_local", "count_local_rooted", "copies_containing",
    "copies_total", "binom", "GenericCountWarning",
    "MergeClass", "MotifDecomposition", "merge_motifs", "leading_term", "decomposition_terms",
    "quadratic_identity_check", "HajekTable", "hajek_projection", "weighted_projection",
    "supports_kernel",
]
