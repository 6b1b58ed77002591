"""Multiplier bootstraps, percentile intervals and the network-effect test.

Both schemes perturb the moment system ``(Lambda, gamma)`` of a fit with
node-level multipliers ``W_i`` (standard normal by default) and re-solve.
Perturbations use ``W_i - 1`` against exactly centered per-node terms, so
constant multipliers ``W == 1`` reproduce the point estimate bit for bit.

* linear scheme: per-node Hajek projections scaled by U-statistic orders,
  then each coordinate multiplied by ``(rho_flat / rho_hat) ** alpha``.
* independent scheme: per-node centered ``L_i L_i'`` and ``L_i Y_i`` terms;
  the Gram part is scaled by ``rho_hat / rho_flat`` and the cross-moment part
  by its square root.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BootstrapFailure, CapabilityError, ConfigurationError
from .estimators import Design, FitResult
from .motifs.hajek import HajekTable, hajek_projection
from .rng import substream

DEFAULT_B = 500
MAX_FLAGGED_FRACTION = 0.02
MIN_REPLICATES = 50
SCHEMES = ("linear_multiplier", "independent_multiplier")


class MultiplierWarning(UserWarning):
    """Non-default multipliers: validity is only established for Gaussian ones."""


@dataclass(frozen=True, eq=False)
class BootstrapRun:
    """Bootstrap replicates of the coefficient vector.

    Rows of ``replicates`` for flagged (singular or non-finite) draws are NaN
    and excluded from :attr:`valid`.
    """

    replicates: np.ndarray
    scheme: str
    corrected: bool
    B: int
    seed: int
    point: FitResult
    flagged: np.ndarray
    ratio: np.ndarray
    stacked: Optional[np.ndarray] = None

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())

    @property
    def valid(self) -> np.ndarray:
        return self.replicates[~self.flagged]

    def se(self) -> np.ndarray:
        return self.valid.std(axis=0, ddof=1)

    def replicate_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replicate", "flagged"] + list(self.point.names))
        for b in range(self.B):
            w.writerow([b, int(self.flagged[b])] + [repr(float(v)) for v in self.replicates[b]])
        return buf.getvalue()

    def summary(self, level: float = 0.95, test: Optional["TestResult"] = None) -> dict:
        out = {
            "scheme": self.scheme, "corrected": self.corrected, "B": self.B, "seed": self.seed,
            "flagged": self.n_flagged, "names": list(self.point.names),
            "point": self.point.beta.tolist(), "se": self.se().tolist(),
        }
        if self.B - self.n_flagged >= MIN_REPLICATES:
            lo, hi = percentile_ci(self, level)
            out["ci"] = {"level": level, "lower": lo.tolist(), "upper": hi.tolist()}
        if test is not None:
            out["test"] = test.to_dict()
        return out

    def summary_json(self, level: float = 0.95, test=None) -> str:
        return json.dumps(self.summary(level, test), indent=2, sort_keys=True)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    critical_value: float
    p_value: float
    alpha: float
    B: int
    reject: bool

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "critical_value": self.critical_value,
                "p_value": self.p_value, "alpha": self.alpha, "B": self.B, "reject": self.reject}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _multipliers(seed: int, start: int, stop: int, n: int, hook: Optional[Callable]) -> np.ndarray:
    """Multipliers for replicates ``start..stop-1``; each replicate has its own stream."""
    W = np.empty((stop - start, n))
    for b in range(start, stop):
        rng = substream(seed, "bootstrap", b)
        W[b - start] = rng.standard_normal(n) if hook is None else np.asarray(hook(rng, n), dtype=float)
    return W


def _warn_hook(hook):
    if hook is not None:
        warnings.warn("bootstrap validity is established for standard normal multipliers only",
                      MultiplierWarning, stacklevel=3)


def _batched_solve(M: np.ndarray, b: np.ndarray, extra_bad: np.ndarray, M0: np.ndarray, b0: np.ndarray,
                   beta0: np.ndarray):
    """Solve each perturbed system ``M beta = b``; flag non-finite or singular ones.

    The solution is written as ``beta0 + M^{-1}((b - b0) - (M - M0) beta0)``,
    which equals ``M^{-1} b`` because ``M0 beta0 = b0``; an unperturbed system
    therefore returns ``beta0`` exactly.
    """
    B, P, _ = M.shape
    b = (b - b0[None]) - np.einsum("bij,j->bi", M - M0[None], beta0)
    finite = np.all(np.isfinite(M.reshape(B, -1)), axis=1) & np.all(np.isfinite(b), axis=1) & ~extra_bad
    out = np.full((B, P), np.nan)
    ok = np.zeros(B, dtype=bool)
    if finite.any():
        idx = np.flatnonzero(finite)
        s = np.linalg.svd(M[idx], compute_uv=False)
        good = s[:, -1] >= 1e-10 * s[:, 0]
        idx = idx[good]
        if idx.size:
            out[idx] = beta0[None] + np.linalg.solve(M[idx], b[idx][:, :, None])[:, :, 0]
            ok[idx] = np.all(np.isfinite(out[idx]), axis=1)
    flagged = ~ok
    out[flagged] = np.nan
    return out, flagged


def _enforce_flag_policy(flagged: np.ndarray):
    frac = flagged.mean() if flagged.size else 0.0
    if frac > MAX_FLAGGED_FRACTION:
        raise BootstrapFailure(
            f"{int(flagged.sum())} of {flagged.size} bootstrap replicates were singular or non-finite "
            f"(limit {MAX_FLAGGED_FRACTION:.0%})")


# ---------------------------------------------------------------------------
# schemes
# ---------------------------------------------------------------------------

def hajek_for_design(design: Design, corrected: bool = False, merges: Optional[dict] = None) -> HajekTable:
    """Projection table for a design with at least one motif column.

    Spectral, composite and external columns are treated like conventional
    covariates.
    """
    motifs = design.motif_columns()
    if not any(m is not None for m in motifs):
        raise CapabilityError("the linear multiplier scheme needs at least one motif column; "
                              "use the independent multiplier scheme for spectral designs")
    if design.graph is None or not design.rho_hat:
        raise ConfigurationError("projections need the graph and the density estimate")
    cols = [m if m is not None else design.Zhat[:, j] for j, m in enumerate(motifs)]
    return hajek_projection(design.graph, design.X, design.Y, cols, design.rho_hat,
                            corrected=corrected, merges=merges, names=design.names)


def run_bootstrap(design: Design, fit: FitResult, scheme: str, B: int = DEFAULT_B, seed: int = 0,
                  multipliers: Optional[Callable] = None, merges: Optional[dict] = None) -> BootstrapRun:
    """Dispatch on ``scheme``, checking it against the design's columns."""
    if scheme in ("linear", "linear_multiplier"):
        if fit.rows is not None:
            raise CapabilityError("down-sampled fits use the independent multiplier scheme")
        table = hajek_for_design(design, fit.corrected, merges)
        return linear_multiplier_bootstrap(fit, table, B, seed, multipliers)
    if scheme in ("independent", "independent_multiplier"):
        return independent_multiplier_bootstrap(design, fit, B, seed, multipliers)
    raise ConfigurationError(f"unknown scheme {scheme!r}; choose linear or independent")


def linear_multiplier_bootstrap(fit: FitResult, hajek: HajekTable, B: int = DEFAULT_B, seed: int = 0,
                                multipliers: Optional[Callable] = None, keep_stacked: bool = False,
                                chunk: int = 4096) -> BootstrapRun:
    """Linear multiplier bootstrap around an OLS or bias-corrected fit."""
    if fit.variant not in ("ols", "bias_corrected"):
        raise CapabilityError(f"linear multiplier bootstrap needs an ols or bias_corrected fit, got {fit.variant}")
    P = fit.beta.size
    if hajek.P != P or hajek.n != fit.n:
        raise ConfigurationError("projection table does not match the fit")
    if B < 1:
        raise ConfigurationError("B must be positive")
    _warn_hook(multipliers)
    G, D, alpha = hajek.stacked()
    DG = G * D[None, :]
    n = fit.n
    aL = alpha[:P * P].reshape(P, P)
    aG = alpha[P * P:P * P + P]
    M0 = fit.system
    b0 = fit.gamma
    reps = np.empty((B, P))
    flagged = np.empty(B, dtype=bool)
    ratio = np.empty(B)
    stacked = np.empty((B, G.shape[1])) if keep_stacked else None
    for s in range(0, B, chunk):
        e = min(B, s + chunk)
        W = _multipliers(seed, s, e, n, multipliers)
        delta = (W - 1.0) @ DG / n
        r = 1.0 + delta[:, -1]
        Msharp = M0[None] + delta[:, :P * P].reshape(-1, P, P)
        bsharp = b0[None] + delta[:, P * P:P * P + P]
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            Mflat = Msharp * r[:, None, None] ** aL[None]
            bflat = bsharp * r[:, None] ** aG[None]
        beta, fl = _batched_solve(Mflat, bflat, ~(r > 0), M0, b0, fit.beta)
        reps[s:e], flagged[s:e], ratio[s:e] = beta, fl, r
        if keep_stacked:
            stacked[s:e] = delta
    _enforce_flag_policy(flagged)
    return BootstrapRun(reps, "linear_multiplier", fit.corrected, B, seed, fit, flagged, ratio, stacked)


def independent_multiplier_bootstrap(design: Design, fit: FitResult, B: int = DEFAULT_B, seed: int = 0,
                                     multipliers: Optional[Callable] = None,
                                     sparsity_scaling: bool = True, chunk: int = 4096) -> BootstrapRun:
    """Independent-data multiplier bootstrap (spectral or mixed designs).

    For a down-sampled fit only its selected rows are perturbed and the
    density rescaling is skipped.
    """
    _warn_hook(multipliers)
    if fit.rows is not None:
        design = design.rows(fit.rows)
        sparsity_scaling = False
    if design.n != fit.n or design.p + design.q != fit.beta.size:
        raise ConfigurationError("design does not match the fit")
    L, Y = design.L, design.Y
    n, P = L.shape
    if sparsity_scaling and (design.graph is None or not design.rho_hat):
        raise ConfigurationError("density rescaling needs the graph; pass sparsity_scaling=False to skip it")
    LL = (L[:, :, None] * L[:, None, :]).reshape(n, P * P)
    cLL = LL - LL.mean(axis=0)
    cLL -= cLL.mean(axis=0)
    LY = L * Y[:, None]
    cLY = LY - LY.mean(axis=0)
    cLY -= cLY.mean(axis=0)
    if sparsity_scaling:
        g = design.graph
        u = g.degree / ((g.n - 1) * design.rho_hat) - 1.0
        u = u - u.mean()
    M0, b0 = fit.system, fit.gamma
    reps = np.empty((B, P))
    flagged = np.empty(B, dtype=bool)
    ratio = np.ones(B)
    for s in range(0, B, chunk):
        e = min(B, s + chunk)
        W = _multipliers(seed, s, e, n, multipliers)
        Wc = W - 1.0
        Msharp = M0[None] + (Wc @ cLL / n).reshape(-1, P, P)
        bsharp = b0[None] + Wc @ cLY / n
        r = np.ones(e - s)
        if sparsity_scaling:
            r = 1.0 + 2.0 * (Wc @ u) / n
        with np.errstate(invalid="ignore", divide="ignore"):
            Mflat = Msharp / r[:, None, None]
            bflat = bsharp / np.sqrt(np.where(r > 0, r, np.nan))[:, None]
        beta, fl = _batched_solve(Mflat, bflat, ~(r > 0), M0, b0, fit.beta)
        reps[s:e], flagged[s:e], ratio[s:e] = beta, fl, r
    _enforce_flag_policy(flagged)
    return BootstrapRun(reps, "independent_multiplier", fit.corrected, B, seed, fit, flagged, ratio)


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

def percentile_ci(run: BootstrapRun, level: float = 0.95, kind: str = "centered"):
    """Per-coefficient ``(lower, upper)`` bounds.

    ``centered``: ``[beta - q_{1-a/2}, beta - q_{a/2}]`` with ``q`` the quantiles of
    the replicate deviations ``beta_b - beta``; ``percentile``: the quantiles of
    the replicates themselves.
    """
    if not (0 < level <= 1):
        raise ConfigurationError("level must lie in (0, 1]")
    valid = run.valid
    if valid.shape[0] < MIN_REPLICATES:
        raise ConfigurationError(f"need at least {MIN_REPLICATES} unflagged replicates, have {valid.shape[0]}")
    a = 1.0 - level
    beta = run.point.beta
    if kind == "centered":
        dev = valid - beta[None, :]
        qlo = np.quantile(dev, a / 2, axis=0)
        qhi = np.quantile(dev, 1 - a / 2, axis=0)
        return beta - qhi, beta - qlo
    if kind == "percentile":
        return np.quantile(valid, a / 2, axis=0), np.quantile(valid, 1 - a / 2, axis=0)
    raise ConfigurationError(f"unknown interval kind {kind!r}")


def network_effect_test(fit: FitResult, run: BootstrapRun, alpha: float = 0.05, z_index=None) -> TestResult:
    """Test of no network effect via ``T = n ||beta_z||^2``.

    The reference distribution is ``n ||beta_z^b - beta_z||^2`` over valid
    replicates.  The critical value is the order statistic ``T_(k)`` with
    ``k = floor(B (1 - alpha)) + 1`` (infinite when ``k > B``) and the p-value
    is the fraction of reference draws at or above ``T``; hence
    ``T > critical value`` exactly when ``p < alpha``.
    """
    if not (0 <= alpha <= 1):
        raise ConfigurationError("alpha must lie in [0, 1]")
    z = fit.z_index if z_index is None else np.asarray(z_index)
    if z.size == 0:
        raise ConfigurationError("fit has no network coefficients")
    n = fit.n
    bz = fit.beta[z]
    T = float(n * (bz @ bz))
    dev = run.valid[:, z] - bz[None, :]
    ref = np.sort(n * np.einsum("ij,ij->i", dev, dev))
    Bv = ref.size
    if Bv == 0:
        raise ConfigurationError("no valid replicates")
    k = math.floor(Bv * (1 - alpha) + 1e-12) + 1
    crit = float(ref[k - 1]) if k <= Bv else math.inf
    p = float(np.count_nonzero(ref >= T) / Bv)
    return TestResult(T, crit, p, float(alpha), Bv, bool(T > crit))
