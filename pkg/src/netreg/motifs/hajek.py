"""Per-node first-order (Hajek) projections of the regression moments.

The stacked statistic is ``(vec(Lambda), gamma, rho_ratio)`` where ``Lambda``
and ``gamma`` are the Gram matrix and cross-moment of the design
``L = (X, Z)`` and ``rho_ratio`` is the edge density relative to its observed
value.  Each entry is (approximately) a U-statistic over node subsets; its
projection onto single nodes drives the linear multiplier bootstrap.

Motif columns use projection kernels.  For a pattern with vertex set ``S`` the
weighted kernel averages a node attribute ``x`` over ``S``; the projection at
node ``i`` sums that average over all copies containing ``i``.  Closed forms
are provided for edges, stars (rooted and unrooted) and triangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import CapabilityError, ConfigurationError
from ..graph import Graph
from .counting import _check_rho, _triangles_per_node, binom, count_local
from .decompose import merge_motifs
from .patterns import MotifSpec


@dataclass(frozen=True, eq=False)
class HajekTable:
    """Centered per-node projections with U-statistic orders and sparsity exponents.

    ``G_lambda[i]`` is the ``P x P`` projection for the Gram block, ``G_gamma[i]``
    the ``P``-vector for the cross-moment and ``G_rho[i]`` the density ratio
    coordinate.  ``D_*`` hold U-statistic orders, ``alpha_*`` the exponents of
    the sparsity-ratio map.
    """

    G_lambda: np.ndarray
    G_gamma: np.ndarray
    G_rho: np.ndarray
    D_lambda: np.ndarray
    D_gamma: np.ndarray
    D_rho: int
    alpha_lambda: np.ndarray
    alpha_gamma: np.ndarray
    corrected: bool
    names: tuple

    @property
    def n(self) -> int:
        return self.G_rho.shape[0]

    @property
    def P(self) -> int:
        return self.G_gamma.shape[1]

    def stacked(self):
        """``(G, D, alpha)`` with ``G`` of shape ``(n, P*P + P + 1)``."""
        n, P = self.n, self.P
        G = np.hstack([self.G_lambda.reshape(n, P * P), self.G_gamma, self.G_rho[:, None]])
        D = np.concatenate([self.D_lambda.ravel(), self.D_gamma, [self.D_rho]]).astype(float)
        alpha = np.concatenate([self.alpha_lambda.ravel(), self.alpha_gamma, [0]]).astype(float)
        return G, D, alpha

    def covariance(self) -> np.ndarray:
        """``n^-2 sum_i D g_i g_i' D``: conditional covariance of the
        multiplier-perturbed stacked statistic."""
        G, D, _ = self.stacked()
        DG = G * D[None, :]
        return DG.T @ DG / self.n ** 2


def supports_kernel(m: MotifSpec) -> bool:
    return m.is_edge or m.is_triangle or m.star_order() is not None


def weighted_projection(g: Graph, m: MotifSpec, x: np.ndarray, rho_hat: float) -> np.ndarray:
    """Per-node projection of ``n^-1 sum_l x_l Q_l(m)``, before centering.

    Its node average equals ``n^-1 sum_l x_l Q_l(m)`` exactly.
    """
    _check_rho(rho_hat)
    x = np.asarray(x, dtype=float)
    A = g.adjacency
    d = g.degree
    n = g.n
    if m.rooted:
        k = m.star_order()
        if k is None:
            raise CapabilityError(f"no projection kernel for rooted pattern {m.label}")
        num = x * binom(d, k) + A @ (x * binom(d - 1, k - 1))
        return num / ((k + 1) * math.comb(n - 1, k) * rho_hat ** k)
    if m.is_edge:
        return (d * x + A @ x) / (2.0 * (n - 1) * rho_hat)
    k = m.star_order()
    if k is not None:
        Ax = A @ x
        c1 = binom(d - 1, k - 1)
        c2 = binom(d - 2, k - 2)
        centre = binom(d, k) * x + c1 * Ax
        leaf = A @ (c1 * x) + x * (A @ c1) + A @ (c2 * Ax) - x * (A @ c2)
        r = k + 1
        return (centre + leaf) / (r * m.iso_count * math.comb(n - 1, k) * rho_hat ** k)
    if m.is_triangle:
        t = _triangles_per_node(g)
        common = (A @ A).multiply(A)
        return (t * x + common @ x) / (3.0 * math.comb(n - 1, 2) * rho_hat ** 3)
    raise CapabilityError(f"no projection kernel for {m.label}; supported: edges, stars, rooted stars, triangles")


def _centered(v: np.ndarray) -> np.ndarray:
    v = v - v.mean(axis=0)
    # second pass removes the rounding left by the first
    return v - v.mean(axis=0)


def hajek_projection(
    g: Graph,
    X: np.ndarray,
    Y: np.ndarray,
    columns: Sequence[Union[MotifSpec, np.ndarray]],
    rho_hat: float,
    corrected: bool = False,
    merges: Optional[dict] = None,
    names: Optional[Sequence[str]] = None,
) -> HajekTable:
    """Projections for the design ``(X, columns)``.

    ``columns`` lists the network covariates in design order; a ``MotifSpec``
    entry is a local frequency computed from ``g`` and an array entry is an
    externally supplied column (e.g. a spectral embedding coordinate), which is
    treated like a conventional covariate.  ``merges`` optionally maps index
    pairs ``(j, k)`` of motif columns to decompositions; missing pairs are
    merged on the fly.  The same leading-term projection is used whether or
    not the point estimate is bias corrected.
    """
    _check_rho(rho_hat)
    n = g.n
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] != n or Y.shape[0] != n:
        raise ConfigurationError("X and Y must have one row per node")
    merges = dict(merges or {})

    # independent (node-level) columns versus motif columns
    vals, motif = [], []
    for j in range(X.shape[1]):
        vals.append(X[:, j])
        motif.append(None)
    for c in columns:
        if isinstance(c, MotifSpec):
            if not supports_kernel(c):
                raise CapabilityError(f"no projection kernel for {c.label}")
            vals.append(None)
            motif.append(c)
        else:
            v = np.asarray(c, dtype=float).ravel()
            if v.shape[0] != n:
                raise ConfigurationError("network column has the wrong length")
            vals.append(v)
            motif.append(None)
    P = len(vals)
    q0 = X.shape[1]

    GL = np.zeros((n, P, P))
    DL = np.ones((P, P), dtype=int)
    AL = np.zeros((P, P), dtype=int)
    GG = np.zeros((n, P))
    DG = np.ones(P, dtype=int)
    AG = np.zeros(P, dtype=int)

    for a in range(P):
        for b in range(a, P):
            ma, mb = motif[a], motif[b]
            if ma is None and mb is None:
                col = vals[a] * vals[b]
                order, alpha = 1, 0
            elif ma is None or mb is None:
                m = ma if ma is not None else mb
                x = vals[b] if ma is not None else vals[a]
                col = weighted_projection(g, m, x, rho_hat)
                order, alpha = m.r, m.s
            else:
                key = (a - q0, b - q0)
                dec = merges.get(key) or merges.get(key[::-1]) or merge_motifs(ma, mb, "leading_only")
                col = np.zeros(n)
                ones = np.ones(n)
                for M, w in dec.leading:
                    # a rooted frequency is not its own projection: leaf roles
                    # must receive their share, as in the cross-moment blocks
                    v = weighted_projection(g, M, ones, rho_hat) if M.rooted else count_local(g, M, rho_hat).values
                    col = col + w * v
                order, alpha = ma.r + mb.r - 1, ma.s + mb.s
            col = _centered(col)
            GL[:, a, b] = col
            GL[:, b, a] = col
            DL[a, b] = DL[b, a] = order
            AL[a, b] = AL[b, a] = alpha
        if motif[a] is None:
            GG[:, a] = _centered(vals[a] * Y)
        else:
            m = motif[a]
            GG[:, a] = _centered(weighted_projection(g, m, Y, rho_hat))
            DG[a] = m.r
            AG[a] = m.s
    Grho = _centered(g.degree / ((n - 1) * rho_hat) - 1.0)
    if names is None:
        names = tuple([f"x{j}" for j in range(q0)] + [
            (c.label if isinstance(c, MotifSpec) else f"z{j}") for j, c in enumerate(columns)])
    return HajekTable(GL, GG, Grho, DL, DG, 2, AL, AG, bool(corrected), tuple(names))
