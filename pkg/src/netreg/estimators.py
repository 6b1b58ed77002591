"""Least-squares estimators for regressions on network covariates.

* :func:`ols_fit` solves the sample normal equations by QR of the design.
* :func:`bias_corrected_fit` replaces the network-by-network block of the
  Gram matrix with merged-pattern leading terms, removing the bias that the
  noise in local frequencies induces in that block.
* :func:`downsample_fit` runs OLS on a subset of nodes whose covariates were
  computed from the whole graph.
* :func:`approximate_targets` approximates the population coefficients with
  noiseless (``beta_star``) and estimated (``beta_tilde``) network covariates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import CapabilityError, ConfigurationError, DegenerateGraphError, RankDeficiencyError
from .graph import Graph, edge_density
from .motifs import (
    MotifSpec, builtin_motif, count_local, leading_term, merge_motifs,
)
from .motifs.counting import _triangles_per_node, binom
from .rng import child_seed, substream
from .spectral import ase, block_ase

SINGULAR_RTOL = 1e-10
PROVENANCE_KINDS = ("motif", "rooted_motif", "spectral", "composite", "external")


@dataclass(frozen=True)
class ColumnTag:
    """Where a network covariate column came from."""

    kind: str
    motif: Optional[MotifSpec] = None
    detail: Optional[str] = None

    def __post_init__(self):
        if self.kind not in PROVENANCE_KINDS:
            raise ConfigurationError(f"unknown column provenance {self.kind!r}")
        if self.kind in ("motif", "rooted_motif") and self.motif is None:
            raise ConfigurationError("motif columns need their pattern")

    @classmethod
    def for_motif(cls, m: MotifSpec) -> "ColumnTag":
        return cls("rooted_motif" if m.rooted else "motif", m)

    @property
    def label(self) -> str:
        if self.motif is not None:
            return self.motif.label
        return self.kind if self.detail is None else f"{self.kind}:{self.detail}"


@dataclass(frozen=True, eq=False)
class Design:
    """Response ``Y``, conventional covariates ``X`` and network covariates ``Zhat``.

    When ``intercept`` is set the first column of ``X`` must be all ones.
    ``graph`` is needed for bias correction and for the bootstrap schemes.
    """

    Y: np.ndarray
    X: np.ndarray
    Zhat: np.ndarray
    provenance: tuple = ()
    rho_hat: Optional[float] = None
    graph: Optional[Graph] = None
    intercept: bool = True
    x_names: Optional[tuple] = None

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        Z = np.asarray(self.Zhat, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        if Z.size == 0:
            Z = np.zeros((Y.shape[0], 0))
        n = Y.shape[0]
        if X.shape[0] != n or Z.shape[0] != n:
            raise ConfigurationError(f"row counts disagree: Y {n}, X {X.shape[0]}, Zhat {Z.shape[0]}")
        if X.shape[1] < 1:
            raise ConfigurationError("X needs at least one column")
        for name, a in (("Y", Y), ("X", X), ("Zhat", Z)):
            if not np.all(np.isfinite(a)):
                bad = np.argwhere(~np.isfinite(a.reshape(n, -1)))[0][0]
                raise ConfigurationError(f"{name} has a non-finite entry at node {bad}")
        if self.intercept and not np.all(X[:, 0] == 1.0):
            raise ConfigurationError("first column of X must be the intercept (all ones)")
        prov = tuple(self.provenance)
        if len(prov) != Z.shape[1]:
            raise ConfigurationError(f"{Z.shape[1]} network columns but {len(prov)} provenance tags")
        if self.graph is not None and self.graph.n != n:
            raise ConfigurationError("graph size does not match the design")
        names = self.x_names
        if names is None:
            names = (("intercept",) if self.intercept else ()) + tuple(
                f"x{j}" for j in range(1 if self.intercept else 0, X.shape[1]))
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Zhat", Z)
        object.__setattr__(self, "provenance", prov)
        object.__setattr__(self, "x_names", tuple(names))

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Zhat.shape[1]

    @property
    def L(self) -> np.ndarray:
        return np.hstack([self.X, self.Zhat])

    @property
    def names(self) -> tuple:
        return self.x_names + tuple(t.label for t in self.provenance)

    @property
    def z_index(self) -> np.ndarray:
        return np.arange(self.p, self.p + self.q)

    def motif_columns(self) -> list:
        """Motifs of the network columns, ``None`` for non-motif columns."""
        return [t.motif if t.kind in ("motif", "rooted_motif") else None for t in self.provenance]

    def rows(self, idx) -> "Design":
        """Sub-design on the given nodes (graph dropped: covariates stay as computed)."""
        idx = np.asarray(idx)
        return Design(self.Y[idx], self.X[idx], self.Zhat[idx], self.provenance, self.rho_hat,
                      None, self.intercept, self.x_names)


@dataclass(frozen=True, eq=False)
class FitResult:
    beta: np.ndarray
    variant: str
    Lambda: np.ndarray
    gamma: np.ndarray
    rho_hat: Optional[float]
    n: int
    names: tuple
    z_index: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    Lambda_mod: Optional[np.ndarray] = None
    m: Optional[int] = None
    rows: Optional[np.ndarray] = None

    @property
    def corrected(self) -> bool:
        return self.variant == "bias_corrected"

    @property
    def system(self) -> np.ndarray:
        """Matrix whose solve against ``gamma`` gives ``beta``."""
        return self.Lambda_mod if self.corrected else self.Lambda

    @property
    def beta_z(self) -> np.ndarray:
        return self.beta[self.z_index]

    def to_dict(self) -> dict:
        d = {
            "variant": self.variant if self.m is None else f"downsampled({self.m})",
            "n": self.n,
            "names": list(self.names),
            "beta": self.beta.tolist(),
            "z_index": self.z_index.tolist(),
            "rho_hat": self.rho_hat,
            "Lambda": self.Lambda.tolist(),
            "gamma": self.gamma.tolist(),
            "diagnostics": self.diagnostics,
        }
        if self.Lambda_mod is not None:
            d["Lambda_mod"] = self.Lambda_mod.tolist()
        if self.m is not None:
            d["m"] = self.m
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

def _check_singular(M: np.ndarray, what: str) -> dict:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or not np.all(np.isfinite(s)) or s[-1] < SINGULAR_RTOL * s[0]:
        raise RankDeficiencyError(
            f"{what} is numerically singular (singular values {np.array2string(s, precision=3)})", s)
    return {"min_singular_value": float(s[-1]), "max_singular_value": float(s[0]),
            "condition_number": float(s[0] / s[-1])}


def solve_ols(L: np.ndarray, Y: np.ndarray):
    """``(beta, Lambda, gamma, diagnostics)`` for the least-squares fit of ``Y`` on ``L``."""
    L = np.asarray(L, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = L.shape[0]
    Lambda = L.T @ L / n
    Lambda = (Lambda + Lambda.T) / 2
    gamma = L.T @ Y / n
    diag = _check_singular(Lambda, "Gram matrix")
    Q, R = np.linalg.qr(L)
    beta = sla.solve_triangular(R, Q.T @ Y)
    return beta, Lambda, gamma, diag


def solve_moments(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``M beta = b`` by QR of ``M``."""
    Q, R = np.linalg.qr(M)
    return sla.solve_triangular(R, Q.T @ b)


def ols_fit(design: Design) -> FitResult:
    beta, Lam, gam, diag = solve_ols(design.L, design.Y)
    return FitResult(beta, "ols", Lam, gam, design.rho_hat, design.n, design.names, design.z_index, diag)


def _design_merges(design: Design, merges: Optional[dict]) -> dict:
    motifs = design.motif_columns()
    out = {}
    for j in range(design.q):
        for k in range(j, design.q):
            key = (j, k)
            dec = None
            if merges:
                dec = merges.get(key) or merges.get((k, j))
            out[key] = dec or merge_motifs(motifs[j], motifs[k], "leading_only")
    return out


def bias_corrected_fit(design: Design, merges: Optional[dict] = None, S: Optional[np.ndarray] = None) -> FitResult:
    """Fit with the network block of the Gram matrix replaced by leading terms.

    ``merges`` maps network-column index pairs ``(j, k)`` to decompositions
    (computed when missing).  ``S`` overrides the replacement block directly.
    """
    if design.q == 0:
        raise ConfigurationError("bias correction needs at least one network column")
    motifs = design.motif_columns()
    if S is None:
        bad = [design.provenance[j].label for j, m in enumerate(motifs) if m is None]
        if bad:
            raise CapabilityError(f"bias correction applies to motif columns only; got {bad}")
        if design.graph is None or design.rho_hat is None:
            raise ConfigurationError("bias correction needs the graph and the density estimate")
        decs = _design_merges(design, merges)
        S = np.zeros((design.q, design.q))
        for (j, k), dec in decs.items():
            S[j, k] = S[k, j] = leading_term(design.graph, dec, design.rho_hat)
    S = np.asarray(S, dtype=float)
    if S.shape != (design.q, design.q):
        raise ConfigurationError("replacement block has the wrong shape")
    L = design.L
    n = design.n
    Lam = L.T @ L / n
    Lam = (Lam + Lam.T) / 2
    gam = L.T @ design.Y / n
    Lmod = Lam.copy()
    z = design.z_index
    Lmod[np.ix_(z, z)] = (S + S.T) / 2
    diag = _check_singular(Lmod, "bias-corrected Gram matrix")
    beta = solve_moments(Lmod, gam)
    diag["S"] = ((S + S.T) / 2).tolist()
    return FitResult(beta, "bias_corrected", Lam, gam, design.rho_hat, n, design.names, z, diag, Lambda_mod=Lmod)


def downsample_fit(design: Design, m: int, selection: str = "seeded_random", seed: int = 0) -> FitResult:
    """OLS on ``m`` nodes; network covariates keep their full-graph values."""
    n, P = design.n, design.p + design.q
    m = int(m)
    if not (P <= m <= n):
        raise ConfigurationError(f"down-sample size must lie in [{P}, {n}], got {m}")
    if selection == "first_m":
        rows = np.arange(m)
    elif selection == "seeded_random":
        rows = np.sort(substream(seed, "selection").choice(n, size=m, replace=False))
    else:
        raise ConfigurationError(f"unknown selection rule {selection!r}")
    sub = design.rows(rows)
    beta, Lam, gam, diag = solve_ols(sub.L, sub.Y)
    return FitResult(beta, "downsampled", Lam, gam, design.rho_hat, m, design.names, design.z_index,
                     diag, m=m, rows=rows)


DOWNSAMPLE_KINDS = ("transitivity", "neighborhood_average", "grdpg_ase")


def choose_downsample_size(lam: float, kind: str, n: int, n_params: int = 1, eps: float = 0.05) -> int:
    """Down-sample size from the mean degree ``lam``.

    ``n_params`` is the number of regression coefficients; the result is
    clipped to ``[n_params + 1, n]``.
    """
    if kind not in DOWNSAMPLE_KINDS:
        raise ConfigurationError(f"kind must be one of {DOWNSAMPLE_KINDS}")
    if not (0 < eps < 0.5):
        raise ConfigurationError("safety exponent must lie in (0, 1/2)")
    if not lam > 0:
        raise ConfigurationError("mean degree must be positive")
    if kind == "transitivity":
        m = math.floor(min(lam, lam ** 3 / n) ** (0.5 - eps))
    elif kind == "neighborhood_average":
        m = math.floor(lam ** (0.5 - eps))
    else:
        m = math.floor(min(min(lam ** 2 / math.log(n) ** 4, n) ** (1 - eps), n))
    if kind != "grdpg_ase":
        while m > 1 and m * math.log(m) > n:
            m -= 1
    lo = min(n_params + 1, n)
    return int(min(max(m, lo), n))


@dataclass(frozen=True, eq=False)
class CompositeColumn:
    values: np.ndarray
    imputed: np.ndarray
    kind: str


def composite_covariate(g: Graph, kind: str, rho_hat: float, x: Optional[np.ndarray] = None) -> CompositeColumn:
    """Local transitivity or neighbourhood average of ``x``.

    Nodes with a zero denominator receive the mean over the other nodes and
    are marked in ``imputed``.
    """
    n = g.n
    d = g.degree.astype(float)
    if kind == "transitivity":
        if not rho_hat > 0:
            raise DegenerateGraphError("density estimate must be positive")
        c = math.comb(n - 1, 2)
        num = 3.0 * _triangles_per_node(g) / (c * rho_hat ** 3)
        wedges = binom(d, 2) + g.adjacency @ np.maximum(d - 1, 0)
        den = wedges / (c * rho_hat ** 2)
    elif kind == "neighborhood_average":
        if x is None:
            raise ConfigurationError("neighbourhood average needs a node attribute")
        x = np.asarray(x, dtype=float)
        num = g.adjacency @ x
        den = d
    else:
        raise ConfigurationError(f"unknown composite kind {kind!r}")
    ok = den > 0
    vals = np.empty(n)
    vals[ok] = num[ok] / den[ok]
    if not ok.any():
        raise DegenerateGraphError("no node has a defined composite value")
    vals[~ok] = vals[ok].mean()
    return CompositeColumn(vals, ~ok, kind)


# ---------------------------------------------------------------------------
# designs from samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovariateRecipe:
    """How to build network covariates from a graph.

    ``motifs``: local frequencies; ``ase_dim``: spectral embedding dimension
    (block-wise when ``blocks`` labels are supplied); ``composite``: list of
    ``(kind, x_column)`` pairs, ``x_column`` indexing the node attributes.
    ``x_columns`` selects which columns of the sample's ``X`` enter the design.
    """

    motifs: tuple = ()
    ase_dim: Optional[int] = None
    composite: tuple = ()
    x_columns: Optional[tuple] = None

    def __post_init__(self):
        ms = tuple(builtin_motif(m) if isinstance(m, str) else m for m in self.motifs)
        object.__setattr__(self, "motifs", ms)
        if not ms and self.ase_dim is None and not self.composite:
            raise ConfigurationError("recipe produces no network covariate")

    def to_dict(self) -> dict:
        return {"motifs": [m.label for m in self.motifs], "ase_dim": self.ase_dim,
                "composite": [list(c) for c in self.composite],
                "x_columns": None if self.x_columns is None else list(self.x_columns)}


def build_design(g: Graph, X: np.ndarray, Y: np.ndarray, recipe: CovariateRecipe,
                 intercept: bool = True, blocks=None, rho_hat: Optional[float] = None,
                 x_names=None) -> Design:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    rho = edge_density(g) if rho_hat is None else rho_hat
    cols, tags = [], []
    for m in recipe.motifs:
        cols.append(count_local(g, m, rho).values)
        tags.append(ColumnTag.for_motif(m))
    if recipe.ase_dim is not None:
        emb = ase(g, recipe.ase_dim, rho) if blocks is None else block_ase(g, blocks, recipe.ase_dim)
        for j in range(emb.Zhat.shape[1]):
            cols.append(emb.Zhat[:, j])
            tags.append(ColumnTag("spectral", detail=str(j + 1)))
    for kind, xc in recipe.composite:
        comp = composite_covariate(g, kind, rho, X[:, xc] if xc is not None else None)
        cols.append(comp.values)
        tags.append(ColumnTag("composite", detail=kind))
    Xd = X if recipe.x_columns is None else X[:, list(recipe.x_columns)]
    if x_names is not None and recipe.x_columns is not None:
        x_names = tuple(x_names[j] for j in recipe.x_columns)
    Z = np.column_stack(cols) if cols else np.zeros((g.n, 0))
    return Design(Y, Xd, Z, tuple(tags), rho, g, intercept, x_names)


def design_from_sample(sample, recipe: CovariateRecipe, blocks=None) -> Design:
    return build_design(sample.graph, sample.X, sample.Y, recipe, intercept=sample.intercept, blocks=blocks)


# ---------------------------------------------------------------------------
# population targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TargetApprox:
    beta_star: np.ndarray
    beta_tilde: Optional[np.ndarray]
    N: int
    mc_se: np.ndarray
    mc_se_tilde: Optional[np.ndarray]
    n: Optional[int]
    rho: float

    def to_dict(self) -> dict:
        return {
            "beta_star": self.beta_star.tolist(), "mc_se": self.mc_se.tolist(),
            "beta_tilde": None if self.beta_tilde is None else self.beta_tilde.tolist(),
            "mc_se_tilde": None if self.mc_se_tilde is None else self.mc_se_tilde.tolist(),
            "N": self.N, "n": self.n, "rho": self.rho,
        }


def _latent_context(spec, N: int, rho: float, seed: int):
    from .graphgen import GraphonSpec, LatentContext

    rng = substream(seed, "targets", 0)
    if isinstance(spec, GraphonSpec):
        xi = rng.random(N)
        return LatentContext(xi=xi, rho=rho, model=spec, density=spec.density(rho))
    if spec.sampler is not None:
        raise CapabilityError("population targets for general GRDPG samplers are not implemented")
    pi = np.asarray(spec.block_probs, dtype=float)
    cdf = np.cumsum(pi)
    cdf[-1] = 1.0
    blocks = np.minimum(np.searchsorted(cdf, rng.random(N), side="right"), pi.size - 1)
    pos, _ = spec.block_positions()
    density = spec.density(rho)
    Z = pos[blocks] * math.sqrt(rho / density)
    return LatentContext(xi=pos[blocks], rho=rho, model=spec, density=density, positions=Z, blocks=blocks)


def _population_columns(X, truth, recipe: CovariateRecipe):
    Xd = X if recipe.x_columns is None else X[:, list(recipe.x_columns)]
    if "Z" not in truth:
        raise ConfigurationError("response model does not expose its noiseless network covariate")
    return np.hstack([Xd, np.asarray(truth["Z"]).reshape(X.shape[0], -1)])


def _batch_se(estimates: np.ndarray) -> np.ndarray:
    k = estimates.shape[0]
    return estimates.std(axis=0, ddof=1) / math.sqrt(k)


def approximate_targets(dgp, spec, recipe: CovariateRecipe, N: int = 100_000, n: Optional[int] = None,
                        rho: Optional[float] = None, seed: int = 0, batches: int = 20,
                        tilde: bool = True) -> TargetApprox:
    """Monte Carlo approximations of the projection coefficients.

    ``beta_star`` regresses ``Y`` on the noiseless covariates over ``N``
    independent nodes.  ``beta_tilde`` pools at least ``N`` nodes from
    independent graphs of size ``n`` and regresses on the estimated
    covariates.  Standard errors come from ``batches`` node batches for
    ``beta_star`` and from the per-graph estimates for ``beta_tilde``.
    """
    from .graphgen import GraphonSpec, sample_graphon, sample_grdpg

    if N < 1000:
        raise ConfigurationError("N must be at least 1000")
    if rho is None:
        if n is None:
            raise ConfigurationError("give n or rho")
        rho = spec.rho(n)
    ctx = _latent_context(spec, N, rho, seed)
    X, Y, truth = dgp(ctx, substream(seed, "targets", 1), substream(seed, "targets", 2))
    L = _population_columns(np.asarray(X, dtype=float).reshape(N, -1), truth, recipe)
    Y = np.asarray(Y, dtype=float)
    try:
        beta_star, *_ = solve_ols(L, Y)
    except RankDeficiencyError as exc:
        raise RankDeficiencyError(f"population Gram estimate is singular: {exc}", exc.singular_values)
    parts = np.array_split(np.arange(N), batches)
    est = np.array([solve_ols(L[p], Y[p])[0] for p in parts])
    se = _batch_se(est)

    beta_tilde = se_tilde = None
    if tilde:
        if n is None:
            raise ConfigurationError("beta_tilde needs the graph size n")
        graphs = max(2, math.ceil(N / n))
        sampler = sample_graphon if isinstance(spec, GraphonSpec) else sample_grdpg
        from dataclasses import replace
        fixed = replace(spec, sparsity=rho)
        LtL, LtY, per = 0.0, 0.0, []
        for r in range(graphs):
            s = sampler(fixed, n, dgp, seed=child_seed(seed, "targets", 3, r))
            des = design_from_sample(s, recipe)
            Lr = des.L
            LtL = LtL + Lr.T @ Lr
            LtY = LtY + Lr.T @ des.Y
            per.append(solve_ols(Lr, des.Y)[0])
        beta_tilde = solve_moments(LtL, LtY)
        se_tilde = _batch_se(np.array(per))
    return TargetApprox(beta_star, beta_tilde, N, se, se_tilde, n, rho)
