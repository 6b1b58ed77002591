"""Adjacency spectral embeddings and orthogonal alignment."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, DegenerateGraphError
from .graph import Graph, edge_density

AMBIGUITY_TOL = 1e-12


class AmbiguousCutoffWarning(RuntimeWarning):
    """The d-th and (d+1)-th eigenvalue magnitudes coincide."""


@dataclass(frozen=True, eq=False)
class Embedding:
    """Scaled leading eigenvectors.

    ``eigvals`` are the retained signed eigenvalues ordered by magnitude;
    for block embeddings they are concatenated block by block and
    ``rho_hat`` is the vector of block-local densities.
    """

    Zhat: np.ndarray
    eigvals: np.ndarray
    rho_hat: Union[float, np.ndarray]
    d: int
    ambiguous: bool = False
    blocks: Optional[tuple] = None

    @property
    def signs(self) -> np.ndarray:
        return np.where(self.eigvals >= 0, 1.0, -1.0)

    def reconstruction(self) -> np.ndarray:
        """``rho_hat * Zhat diag(sign) Zhat'``: the rank-``d`` spectral truncation."""
        if self.blocks is not None:
            raise ConfigurationError("reconstruction is defined for single-block embeddings")
        return self.rho_hat * (self.Zhat * self.signs) @ self.Zhat.T


def _order(vals: np.ndarray) -> np.ndarray:
    """Sort by |value| descending, positive first on ties, then by position."""
    idx = np.arange(vals.size)
    return np.lexsort((idx, (vals < 0).astype(int), -np.abs(vals)))


def _fix_signs(U: np.ndarray) -> np.ndarray:
    k = np.argmax(np.abs(U), axis=0)  # first maximum: lowest index on ties
    s = np.sign(U[k, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s


def _leading_eigs(M: np.ndarray, d: int):
    """Eigenpairs containing the ``d + 1`` largest magnitudes."""
    n = M.shape[0]
    want = d + 1
    if 2 * want >= n or n <= 64:
        vals, vecs = np.linalg.eigh(M)
        return vals, vecs
    lo_v, lo_u = sla.eigh(M, subset_by_index=[0, want - 1], driver="evr")
    hi_v, hi_u = sla.eigh(M, subset_by_index=[n - want, n - 1], driver="evr")
    return np.concatenate([lo_v, hi_v]), np.hstack([lo_u, hi_u])


def ase(g: Union[Graph, np.ndarray], d: int, rho_hat: Optional[float] = None) -> Embedding:
    """Adjacency spectral embedding ``rho_hat^{-1/2} U |S|^{1/2}`` of dimension ``d``.

    ``g`` may also be a symmetric matrix (e.g. a noiseless probability matrix).
    Eigenvectors are oriented so that their largest-magnitude entry is positive.
    """
    if isinstance(g, Graph):
        M = g.dense()
        if rho_hat is None:
            rho_hat = edge_density(g)
    else:
        M = np.asarray(g, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ConfigurationError("matrix input must be square")
        if rho_hat is None:
            raise ConfigurationError("rho_hat is required for matrix input")
    n = M.shape[0]
    if not (1 <= d <= n):
        raise ConfigurationError(f"embedding dimension must lie in [1, {n}], got {d}")
    if not (rho_hat > 0):
        raise DegenerateGraphError(f"density estimate must be positive, got {rho_hat}")
    vals, vecs = _leading_eigs(M, d)
    order = _order(vals)
    vals, vecs = vals[order], vecs[:, order]
    ambiguous = False
    if d < n and vals.size > d and abs(abs(vals[d - 1]) - abs(vals[d])) <= AMBIGUITY_TOL:
        ambiguous = True
        warnings.warn(
            f"eigenvalue magnitudes {abs(vals[d - 1]):.6g} and {abs(vals[d]):.6g} tie at the cutoff d={d}",
            AmbiguousCutoffWarning, stacklevel=2,
        )
    vals, U = vals[:d], _fix_signs(vecs[:, :d])
    Zhat = U * np.sqrt(np.abs(vals))[None, :] / np.sqrt(rho_hat)
    return Embedding(Zhat, vals, float(rho_hat), d, ambiguous)


def block_ase(g: Graph, labels, d: int) -> Embedding:
    """Per-block embeddings of induced subgraphs, normalized by block-local
    densities and placed in disjoint, zero-padded column groups.

    Blocks are ordered by sorted label; block ``s`` occupies columns
    ``s*d .. (s+1)*d - 1``.
    """
    labels = np.asarray(labels)
    if labels.shape != (g.n,):
        raise ConfigurationError("every node needs exactly one block label")
    blocks = np.unique(labels)
    Zhat = np.zeros((g.n, d * blocks.size))
    eig, rhos, amb = [], [], False
    for s, b in enumerate(blocks):
        nodes = np.flatnonzero(labels == b)
        if nodes.size < max(d, 2):
            raise DegenerateGraphError(f"block {b!r} has {nodes.size} node(s); needs at least {max(d, 2)}")
        sub = g.induced(nodes)
        rho_s = edge_density(sub)
        if rho_s == 0:
            raise DegenerateGraphError(f"block {b!r} has no internal edges")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", AmbiguousCutoffWarning)
            emb = ase(sub, d, rho_s)
        for w in caught:
            amb = True
            warnings.warn(f"block {b!r}: {w.message}", AmbiguousCutoffWarning, stacklevel=2)
        Zhat[nodes, s * d:(s + 1) * d] = emb.Zhat
        eig.append(emb.eigvals)
        rhos.append(rho_s)
    return Embedding(Zhat, np.concatenate(eig), np.asarray(rhos), d, amb, tuple(blocks.tolist()))


@dataclass(frozen=True, eq=False)
class Alignment:
    Q: np.ndarray
    residual: float
    rank_deficient: bool


def procrustes_align(a, b) -> Alignment:
    """Orthogonal ``Q`` minimizing ``||a Q - b||_F`` (SVD of ``a' b``)."""
    a = a.Zhat if isinstance(a, Embedding) else np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ConfigurationError(f"shapes differ: {a.shape} vs {b.shape}")
    U, s, Vt = np.linalg.svd(a.T @ b)
    Q = U @ Vt
    tol = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank_def = bool(s.size == 0 or s[-1] <= tol)
    return Alignment(Q, float(np.linalg.norm(a @ Q - b)), rank_def)
