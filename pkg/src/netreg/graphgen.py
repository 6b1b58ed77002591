"""Samplers for sparse graphon and generalized random dot product graphs.

A draw consists of latent node positions, an undirected graph whose edges are
independent given the latents, and node-level covariates and responses
produced by a response model (a "DGP").  All randomness comes from named
substreams of one integer seed (see :mod:`netreg.rng`): latents, edges,
covariates and noise never share a stream, and edge draws are keyed by row,
so enlarging ``n`` leaves every earlier draw unchanged.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .errors import ConfigurationError
from .graph import Graph, edge_density
from .rng import substream

__all__ = [
    "Kernel", "ConstantKernel", "InverseSumKernel", "AffineProductKernel", "FunctionKernel",
    "PowerLaw", "GraphonSpec", "GrdpgSpec", "Sample", "LatentContext",
    "LinearGraphonDGP", "NonlinearGraphonDGP", "GrdpgLinearDGP", "NeighborhoodAverageDGP",
    "FunctionDGP", "sample_graphon", "sample_grdpg", "edge_density", "three_block_model",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _panel_rule(panels: int = 8):
    """Composite Gauss-Legendre nodes and weights on [0, 1]."""
    edges = np.linspace(0.0, 1.0, panels + 1)
    h = np.diff(edges)
    x = (edges[:-1, None] + h[:, None] * (_GL_X[None, :] + 1) / 2).ravel()
    w = (h[:, None] * _GL_W[None, :] / 2).ravel()
    return x, w


_QX, _QW = _panel_rule()


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

class Kernel:
    """Symmetric graphon kernel ``w(u, v)`` evaluated elementwise with broadcasting.

    Subclasses may override :meth:`truncated_degree` with a closed form; the
    default integrates numerically.
    """

    bound: float = math.inf

    def __call__(self, u, v):
        raise NotImplementedError

    def truncated_degree(self, x, rho: float) -> np.ndarray:
        """``m(x) = E_V[min(rho * w(x, V), 1)]`` for ``V ~ U[0, 1]``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        step = max(1, 2_000_000 // _QX.size)
        for s in range(0, x.size, step):
            xs = x[s:s + step, None]
            out[s:s + step] = np.minimum(rho * self(xs, _QX[None, :]), 1.0) @ _QW
        return out

    def neighbor_mean(self, x, rho: float, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """``E[f(V) | edge to a node at x]`` under truncated connection probabilities."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = np.minimum(rho * self(x[:, None], _QX[None, :]), 1.0) * _QW[None, :]
        return (p @ f(_QX)) / p.sum(axis=1)

    def describe(self) -> dict:
        return {"kernel": type(self).__name__}


@dataclass(frozen=True)
class ConstantKernel(Kernel):
    """``w == c``; with ``rho * c = p`` this is the Erdos-Renyi model."""

    c: float = 1.0

    @property
    def bound(self):
        return self.c

    def __call__(self, u, v):
        return np.full(np.broadcast(np.asarray(u), np.asarray(v)).shape, float(self.c))

    def truncated_degree(self, x, rho):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.full(x.shape, min(rho * self.c, 1.0))

    def describe(self):
        return {"kernel": "constant", "c": self.c}


@dataclass(frozen=True)
class InverseSumKernel(Kernel):
    """``w(u, v) = 1 / (u + v)``.  Unbounded near the origin, so every draw
    with ``rho < 1`` has a region where the probability is truncated at one."""

    bound: float = math.inf

    def __call__(self, u, v):
        with np.errstate(divide="ignore"):
            return 1.0 / (np.asarray(u, dtype=float) + np.asarray(v, dtype=float))

    def truncated_degree(self, x, rho):
        # min(rho/(x+v), 1) equals 1 for v < rho - x and rho/(x+v) beyond.
        x = np.atleast_1d(np.asarray(x, dtype=float))
        a = np.clip(rho - x, 0.0, 1.0)
        return a + rho * np.log((1.0 + x) / (x + a))

    def describe(self):
        return {"kernel": "inverse_sum"}


@dataclass(frozen=True)
class AffineProductKernel(Kernel):
    """``w(u, v) = a + b * u * v``; bounded below by ``a`` and above by ``a + b``."""

    a: float = 1.0
    b: float = 2.0

    @property
    def bound(self):
        return self.a + self.b

    def __call__(self, u, v):
        return self.a + self.b * np.asarray(u, dtype=float) * np.asarray(v, dtype=float)

    def truncated_degree(self, x, rho):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if rho * (self.a + self.b) <= 1.0:
            return rho * (self.a + self.b * x / 2.0)
        # rho (a + b x v) reaches one at v = t; the probability is capped beyond
        with np.errstate(divide="ignore"):
            t = np.clip((1.0 / rho - self.a) / (self.b * x), 0.0, 1.0)
        return rho * (self.a * t + self.b * x * t ** 2 / 2.0) + (1.0 - t)

    def describe(self):
        return {"kernel": "affine_product", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class FunctionKernel(Kernel):
    """User-supplied vectorized kernel function."""

    fn: Callable = field(compare=False)
    bound: float = math.inf
    name: str = "user"

    def __call__(self, u, v):
        return np.asarray(self.fn(u, v), dtype=float)

    def describe(self):
        return {"kernel": self.name}


# ---------------------------------------------------------------------------
# model specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLaw:
    """Sparsity rule ``rho_n = n ** delta``."""

    delta: float

    def __post_init__(self):
        if not self.delta <= 0:
            raise ConfigurationError(f"sparsity exponent must be nonpositive, got {self.delta}")

    def __call__(self, n: int) -> float:
        return float(n) ** self.delta


def _resolve_rho(sparsity, n: int) -> float:
    rho = float(sparsity(n)) if callable(sparsity) else float(sparsity)
    if not (0.0 < rho <= 1.0) or not math.isfinite(rho):
        raise ConfigurationError(f"sparsity rho_n must lie in (0, 1], got {rho}")
    return rho


@dataclass(frozen=True)
class GraphonSpec:
    kernel: Kernel
    sparsity: Union[float, PowerLaw, Callable[[int], float]] = 1.0
    bound: Optional[float] = None

    def rho(self, n: int) -> float:
        return _resolve_rho(self.sparsity, n)

    def upper_bound(self) -> float:
        return float(self.bound) if self.bound is not None else float(getattr(self.kernel, "bound", math.inf))

    def validate(self):
        g = np.linspace(0.05, 0.95, 7)
        w1 = self.kernel(g[:, None], g[None, :])
        if not np.allclose(w1, w1.T, rtol=1e-12, atol=0):
            raise ConfigurationError("graphon kernel is not symmetric")
        if np.any(w1 < 0):
            raise ConfigurationError("graphon kernel takes negative values")

    def density(self, rho: float) -> float:
        """Population edge probability ``E[min(rho w(U, V), 1)]``."""
        return _graphon_density(self.kernel, float(rho))


@lru_cache(maxsize=256)
def _graphon_density(kernel: Kernel, rho: float) -> float:
    f = lambda x: float(kernel.truncated_degree(np.array([x]), rho)[0])
    pts = [p for p in (rho,) if 0 < p < 1]
    val, _ = integrate.quad(f, 0.0, 1.0, points=pts or None, limit=200, epsabs=1e-13, epsrel=1e-11)
    return val


def _signed_order(vals: np.ndarray) -> np.ndarray:
    """Indices sorting by |value| descending, positive before negative on ties,
    then by original position."""
    idx = np.arange(vals.size)
    return np.array(sorted(idx, key=lambda i: (-abs(vals[i]), 0 if vals[i] >= 0 else 1, i)), dtype=int)


@dataclass(frozen=True)
class GrdpgSpec:
    """Generalized random dot product graph.

    Either a block model (``block_probs`` and ``B``) or a general ``sampler``
    ``(rng, n) -> (chi, zeta)`` returning positive- and negative-part latent
    coordinates.  ``signature`` is derived for block models.
    """

    block_probs: Optional[Sequence[float]] = None
    B: Optional[Sequence[Sequence[float]]] = None
    sampler: Optional[Callable] = field(default=None, compare=False)
    signature: Optional[tuple] = None
    sparsity: Union[float, PowerLaw, Callable[[int], float]] = 1.0

    def __post_init__(self):
        if self.sampler is None:
            if self.block_probs is None or self.B is None:
                raise ConfigurationError("GRDPG needs either a block model (block_probs, B) or a sampler")
            pi = np.asarray(self.block_probs, dtype=float)
            B = np.asarray(self.B, dtype=float)
            if pi.ndim != 1 or np.any(pi < 0) or not math.isclose(pi.sum(), 1.0, abs_tol=1e-12):
                raise ConfigurationError("block probabilities must be nonnegative and sum to 1")
            if B.shape != (pi.size, pi.size) or not np.allclose(B, B.T, atol=0):
                raise ConfigurationError("B must be a symmetric K x K matrix")
            if np.any(B < 0) or np.any(B > 1):
                raise ConfigurationError("B entries must lie in [0, 1]")
            vals = np.linalg.eigvalsh(B)
            tol = 1e-12 * max(1.0, np.abs(vals).max())
            sig = (int(np.sum(vals > tol)), int(np.sum(vals < -tol)))
            if self.signature is not None and tuple(self.signature) != sig:
                raise ConfigurationError(f"declared signature {self.signature} disagrees with B's {sig}")
            object.__setattr__(self, "signature", sig)
        elif self.signature is None:
            raise ConfigurationError("a general GRDPG sampler must declare its signature (r+, r-)")

    @property
    def d(self) -> int:
        return int(sum(self.signature))

    def rho(self, n: int) -> float:
        return _resolve_rho(self.sparsity, n)

    def block_positions(self) -> np.ndarray:
        """Rows ``V |D|^{1/2}`` for each block, columns ordered by |eigenvalue|."""
        B = np.asarray(self.B, dtype=float)
        vals, vecs = np.linalg.eigh(B)
        tol = 1e-12 * max(1.0, np.abs(vals).max())
        keep = np.abs(vals) > tol
        vals, vecs = vals[keep], vecs[:, keep]
        order = _signed_order(vals)
        vals, vecs = vals[order], vecs[:, order]
        for j in range(vecs.shape[1]):
            k = int(np.argmax(np.abs(vecs[:, j])))
            if vecs[k, j] < 0:
                vecs[:, j] = -vecs[:, j]
        return vecs * np.sqrt(np.abs(vals))[None, :], vals

    def density(self, rho: float) -> float:
        pi = np.asarray(self.block_probs, dtype=float)
        P = np.clip(rho * np.asarray(self.B, dtype=float), 0.0, 1.0)
        return float(pi @ P @ pi)


def three_block_model(sparsity=1.0) -> GrdpgSpec:
    """Three-community model used in the GRDPG coverage study."""
    return GrdpgSpec(
        block_probs=(0.65, 0.25, 0.10),
        B=((0.80, 0.20, 0.10), (0.20, 0.70, 0.15), (0.10, 0.15, 0.90)),
        sparsity=sparsity,
    )


# ---------------------------------------------------------------------------
# samples and response models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatentContext:
    """What a response model may see about the latent structure of a draw."""

    xi: np.ndarray
    rho: float
    model: Union[GraphonSpec, GrdpgSpec]
    density: float
    positions: Optional[np.ndarray] = None
    blocks: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.xi.shape[0])

    def rooted_star(self, k: int) -> np.ndarray:
        """Noiseless rooted ``k``-star covariate ``(m(xi)/rho_bar)**k``.

        This is the probability limit of the normalized local rooted star
        count, with truncated edge probabilities taken into account.
        """
        m = self.model.kernel.truncated_degree(self.xi, self.rho)
        return (m / self.density) ** k

    def latent_positions(self) -> np.ndarray:
        if self.positions is None:
            raise ConfigurationError("latent positions are only defined for GRDPG draws")
        return self.positions


@dataclass(frozen=True, eq=False)
class Sample:
    graph: Graph
    xi: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    truth: dict = field(default_factory=dict)
    intercept: bool = True

    def __post_init__(self):
        n = self.graph.n
        for name in ("xi", "X", "Y"):
            a = getattr(self, name)
            if a.shape[0] != n:
                raise ConfigurationError(f"{name} has {a.shape[0]} rows, graph has {n} nodes")
        if self.intercept and not np.all(self.X[:, 0] == 1.0):
            raise ConfigurationError("first column of X must be the intercept")


def _mvn(rng: np.random.Generator, n: int, mean, cov) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    L = np.linalg.cholesky(np.asarray(cov, dtype=float))
    return rng.standard_normal((n, mean.size)) @ L.T + mean


@dataclass(frozen=True)
class LinearGraphonDGP:
    """``Y = b0 + bz Z + b1 X1 + b2 X2 + eps`` with Gaussian ``X`` and ``Z`` the
    noiseless rooted ``star``-star covariate.  Coefficients in ``truth['beta']``
    follow the design column order (intercept, X1, X2, Z)."""

    intercept_coef: float = 1.0
    z_coef: float = 20.0
    x_coefs: tuple = (3.0, 2.0)
    x_mean: tuple = (1.0, 3.0)
    x_cov: tuple = ((1.0, 0.6), (0.6, 4.0))
    noise_sd: float = 1.0
    star: int = 2
    intercept: bool = True

    def __call__(self, ctx: LatentContext, rng_cov, rng_noise):
        Z = ctx.rooted_star(self.star)
        Xc = _mvn(rng_cov, ctx.n, self.x_mean, self.x_cov)
        eps = self.noise_sd * rng_noise.standard_normal(ctx.n)
        Y = self.intercept_coef + Xc @ np.asarray(self.x_coefs) + self.z_coef * Z + eps
        X = np.column_stack([np.ones(ctx.n), Xc])
        beta = np.concatenate([[self.intercept_coef], self.x_coefs, [self.z_coef]])
        return X, Y, {"Z": Z[:, None], "beta": beta}


@dataclass(frozen=True)
class NonlinearGraphonDGP:
    """``Y = log(1 + 5 Z |X1|) + sqrt(5 Z) sin(X2 / 2) + eps`` with the noiseless
    rooted ``star``-star covariate ``Z`` and Gaussian ``X``."""

    x_mean: tuple = (0.0, 0.0)
    x_cov: tuple = ((1.0, 0.3), (0.3, 1.0))
    noise_sd: float = 1.0
    star: int = 2
    intercept: bool = True

    def mean_response(self, Z, Xc):
        return np.log1p(5.0 * Z * np.abs(Xc[:, 0])) + np.sqrt(5.0 * Z) * np.sin(0.5 * Xc[:, 1])

    def __call__(self, ctx: LatentContext, rng_cov, rng_noise):
        Z = ctx.rooted_star(self.star)
        Xc = _mvn(rng_cov, ctx.n, self.x_mean, self.x_cov)
        eps = self.noise_sd * rng_noise.standard_normal(ctx.n)
        Y = self.mean_response(Z, Xc) + eps
        X = np.column_stack([np.ones(ctx.n), Xc])
        return X, Y, {"Z": Z[:, None]}


@dataclass(frozen=True)
class GrdpgLinearDGP:
    """``Y = X b_x + Z b_z + eps`` without intercept, ``Z`` the normalized latent
    positions of a GRDPG draw and ``X`` standard bivariate normal."""

    x_coefs: tuple = (1.0, 2.0)
    z_coefs: tuple = (1.0, 2.0, 1.0)
    corr: float = 0.3
    noise_sd: float = 1.0
    intercept: bool = False

    def __call__(self, ctx: LatentContext, rng_cov, rng_noise):
        Z = ctx.latent_positions()
        if Z.shape[1] != len(self.z_coefs):
            raise ConfigurationError(f"model has {Z.shape[1]} latent dimensions, got {len(self.z_coefs)} coefficients")
        Xc = _mvn(rng_cov, ctx.n, (0.0, 0.0), ((1.0, self.corr), (self.corr, 1.0)))
        eps = self.noise_sd * rng_noise.standard_normal(ctx.n)
        Y = Xc @ np.asarray(self.x_coefs) + Z @ np.asarray(self.z_coefs) + eps
        beta = np.concatenate([self.x_coefs, self.z_coefs])
        return Xc, Y, {"Z": Z, "beta": beta}


@dataclass(frozen=True)
class NeighborhoodAverageDGP:
    """Node attribute ``X1 = xi + s * N(0, 1)`` whose neighbourhood average is the
    network covariate.  ``Y = b0 + bz Z + eps`` with ``Z(xi) = E[X1_j | i ~ j, xi_i]``.
    ``X`` carries the intercept and the attribute ``X1``."""

    intercept_coef: float = 1.0
    z_coef: float = 2.0
    attr_noise_sd: float = 0.5
    noise_sd: float = 1.0
    intercept: bool = True

    def __call__(self, ctx: LatentContext, rng_cov, rng_noise):
        Z = ctx.model.kernel.neighbor_mean(ctx.xi, ctx.rho, lambda v: v)
        x1 = ctx.xi + self.attr_noise_sd * rng_cov.standard_normal(ctx.n)
        eps = self.noise_sd * rng_noise.standard_normal(ctx.n)
        Y = self.intercept_coef + self.z_coef * Z + eps
        X = np.column_stack([np.ones(ctx.n), x1])
        return X, Y, {"Z": Z[:, None], "beta": np.array([self.intercept_coef, self.z_coef])}


@dataclass(frozen=True)
class FunctionDGP:
    """Wrap ``fn(ctx, rng_cov, rng_noise) -> (X, Y[, truth])`` as a response model."""

    fn: Callable = field(compare=False)
    intercept: bool = True

    def __call__(self, ctx, rng_cov, rng_noise):
        out = self.fn(ctx, rng_cov, rng_noise)
        if len(out) == 2:
            return out[0], out[1], {}
        return out


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _sample_edges(n: int, seed: int, row_probs: Callable[[int], np.ndarray]) -> Graph:
    """Bernoulli edges; row ``i`` uses its own stream for pairs ``(i, j > i)``."""
    src, dst = [], []
    for i in range(n - 1):
        p = row_probs(i)
        u = substream(seed, "edges", i).random(n - i - 1)
        hit = np.flatnonzero(u < p)
        if hit.size:
            src.append(np.full(hit.size, i, dtype=np.int64))
            dst.append(hit + i + 1)
    if src:
        e = np.column_stack([np.concatenate(src), np.concatenate(dst)])
    else:
        e = np.zeros((0, 2), dtype=np.int64)
    return Graph(n, e)


def _draw_response(dgp, ctx: LatentContext, seed: int):
    rng_cov = substream(seed, "covariates")
    rng_noise = substream(seed, "noise")
    X, Y, truth = dgp(ctx, rng_cov, rng_noise)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Y = np.asarray(Y, dtype=float).ravel()
    return X, Y, dict(truth)


def sample_graphon(spec: GraphonSpec, n: int, dgp=None, seed: int = 0) -> Sample:
    """Draw ``n`` nodes from a sparse graphon model and attach a response model."""
    if n < 2:
        raise ConfigurationError("need at least two nodes")
    spec.validate()
    rho = spec.rho(n)
    bound = spec.upper_bound()
    xi = substream(seed, "latents").random(n)
    kernel = spec.kernel

    def row(i):
        w = kernel(xi[i], xi[i + 1:])
        if w.size and w.max() > bound * (1 + 1e-12):
            raise ConfigurationError(f"kernel value {w.max():.6g} exceeds declared bound {bound}")
        return np.minimum(rho * w, 1.0)

    g = _sample_edges(n, seed, row)
    truth = {"rho": rho}
    if dgp is None:
        X, Y, intercept = np.ones((n, 1)), np.zeros(n), True
    else:
        ctx = LatentContext(xi=xi, rho=rho, model=spec, density=spec.density(rho))
        X, Y, extra = _draw_response(dgp, ctx, seed)
        truth.update(extra)
        truth["density"] = ctx.density
        intercept = getattr(dgp, "intercept", True)
    return Sample(graph=g, xi=xi, X=X, Y=Y, truth=truth, intercept=intercept)


def sample_grdpg(spec: GrdpgSpec, n: int, dgp=None, seed: int = 0) -> Sample:
    """Draw ``n`` nodes from a GRDPG and attach a response model.

    ``truth['Z']`` holds the latent positions divided by the square root of the
    population edge density, which is what the adjacency spectral embedding
    normalized by the observed density estimates (up to rotation).
    """
    if n < 2:
        raise ConfigurationError("need at least two nodes")
    rho = spec.rho(n)
    rng_lat = substream(seed, "latents")
    blocks = None
    if spec.sampler is None:
        pi = np.asarray(spec.block_probs, dtype=float)
        cdf = np.cumsum(pi)
        cdf[-1] = 1.0
        blocks = np.searchsorted(cdf, rng_lat.random(n), side="right")
        blocks = np.minimum(blocks, pi.size - 1)
        pos, vals = spec.block_positions()
        latent = pos[blocks]
        Pb = np.clip(rho * np.asarray(spec.B, dtype=float), 0.0, 1.0)
        density = spec.density(rho)
        row = lambda i: Pb[blocks[i], blocks[i + 1:]]
    else:
        chi, zeta = spec.sampler(rng_lat, n)
        chi = np.asarray(chi, dtype=float).reshape(n, -1)
        zeta = np.asarray(zeta, dtype=float).reshape(n, -1) if zeta is not None else np.zeros((n, 0))
        if (chi.shape[1], zeta.shape[1]) != tuple(spec.signature):
            raise ConfigurationError("sampler output does not match the declared signature")
        latent = np.hstack([chi, zeta])
        sgn = np.concatenate([np.ones(chi.shape[1]), -np.ones(zeta.shape[1])])
        # density of the draw conditional on its latents (exact pair average)
        G = (latent * sgn) @ latent.T
        iu = np.triu_indices(n, 1)
        density = float(np.clip(rho * G[iu], 0.0, 1.0).mean())
        row = lambda i: np.clip(rho * (latent[i] * sgn) @ latent[i + 1:].T, 0.0, 1.0)
    g = _sample_edges(n, seed, row)
    if density <= 0:
        raise ConfigurationError("model has zero edge density")
    Z = latent * math.sqrt(rho / density)
    truth = {"rho": rho, "density": density, "positions": latent, "Z": Z}
    if blocks is not None:
        truth["blocks"] = blocks
    if dgp is None:
        X, Y, intercept = np.ones((n, 1)), np.zeros(n), True
    else:
        ctx = LatentContext(xi=latent, rho=rho, model=spec, density=density, positions=Z, blocks=blocks)
        X, Y, extra = _draw_response(dgp, ctx, seed)
        truth.update(extra)
        intercept = getattr(dgp, "intercept", True)
    return Sample(graph=g, xi=latent, X=X, Y=Y, truth=truth, intercept=intercept)
