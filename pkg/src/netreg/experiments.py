"""Monte Carlo study harness.

Every study is registered under an id with three pieces: ``prepare`` computes
shared context once (e.g. population targets), ``run`` performs Monte Carlo
iteration ``k`` and returns flat result rows, and ``aggregate`` turns the rows
into summary tables.  Iteration seeds derive from the master seed and the
iteration index only, so results do not depend on execution order or on the
number of worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import platform
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import io as nio
from .bootstrap import (
    hajek_for_design, independent_multiplier_bootstrap, linear_multiplier_bootstrap,
    network_effect_test, percentile_ci,
)
from .errors import CapabilityError, ConfigurationError, SchemaError
from .estimators import (
    CovariateRecipe, approximate_targets, bias_corrected_fit, choose_downsample_size,
    design_from_sample, downsample_fit, ols_fit,
)
from .graph import edge_density
from .graphgen import (
    AffineProductKernel, ConstantKernel, GraphonSpec, GrdpgLinearDGP, InverseSumKernel,
    LinearGraphonDGP, NeighborhoodAverageDGP, NonlinearGraphonDGP, PowerLaw, sample_graphon,
    sample_grdpg, three_block_model,
)
from .motifs import builtin_motif
from .motifs.hajek import supports_kernel
from .rng import child_seed

DESK_N = 1000
FULL_N = 4000

KERNELS = {
    "inverse_sum": lambda: InverseSumKernel(),
    "affine_product": lambda: AffineProductKernel(),
    "constant": lambda: ConstantKernel(0.5),
}
RESPONSES = {
    "linear": lambda: LinearGraphonDGP(),
    "nonlinear": lambda: NonlinearGraphonDGP(),
    "neighborhood_average": lambda: NeighborhoodAverageDGP(),
}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one study.

    ``delta`` sets ``rho_n = n ** delta``; ``rho`` fixes the sparsity instead.
    ``deltas`` lists several exponents for studies that sweep sparsity.
    ``params`` carries study-specific options (see each study's docstring).
    """

    experiment: str
    n: int = DESK_N
    delta: Optional[float] = None
    rho: Optional[float] = None
    deltas: tuple = ()
    mc: int = 200
    B: int = 500
    d: Optional[int] = None
    motifs: tuple = ()
    downsample: Optional[str] = None
    level: float = 0.95
    alpha: float = 0.05
    targets_N: int = 100_000
    seed: int = 0
    params: dict = field(default_factory=dict)
    output_dir: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in REGISTRY:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; choose from {sorted(REGISTRY)}")
        for name in ("n", "mc", "B", "targets_N", "workers"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v <= 0:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        if self.n < 3:
            raise ConfigurationError("n must be at least 3")
        ds = tuple(float(x) for x in self.deltas)
        object.__setattr__(self, "deltas", ds)
        for dlt in ds + ((self.delta,) if self.delta is not None else ()):
            if not dlt < 0:
                raise ConfigurationError(f"sparsity exponent must be negative, got {dlt}")
        if self.delta is not None and self.rho is not None:
            raise ConfigurationError("give delta or rho, not both")
        if self.rho is not None and not (0 < self.rho <= 1):
            raise ConfigurationError(f"rho must lie in (0, 1], got {self.rho}")
        if self.d is not None and self.d < 1:
            raise ConfigurationError("embedding dimension must be positive")
        if not (0 < self.level < 1):
            raise ConfigurationError("level must lie in (0, 1)")
        if not (0 <= self.alpha <= 1):
            raise ConfigurationError("alpha must lie in [0, 1]")
        ms = []
        for m in self.motifs:
            spec = builtin_motif(m) if isinstance(m, str) else m
            if not supports_kernel(spec):
                raise ConfigurationError(f"motif {spec.label} has no projection kernel; "
                                         "supported: edges, stars, rooted stars, triangles")
            ms.append(spec.label)
        object.__setattr__(self, "motifs", tuple(ms))
        if self.downsample is not None and self.downsample not in ("neighborhood_average", "transitivity"):
            raise ConfigurationError("downsample must be 'neighborhood_average' or 'transitivity'")
        object.__setattr__(self, "params", dict(self.params))

    def sparsities(self, default: tuple) -> tuple:
        """Sparsity settings to sweep, as ``('delta', value)`` or ``('rho', value)``."""
        if self.rho is not None:
            return (("rho", self.rho),)
        if self.deltas:
            return tuple(("delta", x) for x in self.deltas)
        if self.delta is not None:
            return (("delta", self.delta),)
        return tuple(("delta", x) for x in default)

    def effective(self) -> dict:
        """Settings that determine the results (output location and worker count excluded)."""
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("output_dir", "workers")}
        d["deltas"] = list(d["deltas"])
        d["motifs"] = list(d["motifs"])
        return d

    def canonical(self) -> str:
        return json.dumps(nio._jsonable(self.effective()), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def to_dict(self) -> dict:
        d = self.effective()
        d["output_dir"] = self.output_dir
        d["workers"] = self.workers
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        for k in ("deltas", "motifs"):
            if k in d and d[k] is not None:
                d[k] = tuple(d[k])
        return cls(**d)


def _spec_for(kind: str, value: float, kernel) -> GraphonSpec:
    return GraphonSpec(kernel, PowerLaw(value) if kind == "delta" else float(value))


def _seed(cfg: ExperimentConfig, k: int, j: int = 0) -> int:
    return child_seed(cfg.seed, "mc", k, j)


def _covers(lo, hi, target) -> list:
    return [bool(a <= t <= b) for a, b, t in zip(lo, hi, target)]


def _mean(xs) -> float:
    xs = list(xs)
    return math.fsum(xs) / len(xs) if xs else float("nan")


def _quantile(xs, q) -> float:
    return float(np.quantile(np.asarray(list(xs), dtype=float), q))


def _group(rows, key):
    out = {}
    for r in rows:
        out.setdefault(r[key], []).append(r)
    return out


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

ROOTED_TWO_STAR = "rooted_k_star(2)"


def _fig1_prepare(cfg):
    return {}


def _fig1_run(cfg, k, ctx):
    """Linear response, rooted two-star covariate: OLS versus bias-corrected."""
    rows = []
    rec = CovariateRecipe(motifs=(ROOTED_TWO_STAR,))
    for j, (kind, v) in enumerate(cfg.sparsities((-0.75, -0.4, -0.25))):
        s = sample_graphon(_spec_for(kind, v, InverseSumKernel()), cfg.n, LinearGraphonDGP(), seed=_seed(cfg, k, j))
        d = design_from_sample(s, rec)
        rows.append({"sparsity": f"{kind}={v}", "run": k, "ols_z": float(ols_fit(d).beta[-1]),
                     "corrected_z": float(bias_corrected_fit(d).beta[-1]),
                     "mean_degree": float(s.graph.degree.mean())})
    return rows


def _fig1_aggregate(rows, cfg, ctx):
    out = {}
    for key, rs in _group(rows, "sparsity").items():
        o = [r["ols_z"] for r in rs]
        c = [r["corrected_z"] for r in rs]
        lo_o, hi_o = _quantile(o, 0.05), _quantile(o, 0.95)
        lo_c, hi_c = _quantile(c, 0.05), _quantile(c, 0.95)
        out[key] = {
            "runs": len(rs), "truth": 20.0,
            "ols_mean": _mean(o), "corrected_mean": _mean(c),
            "ols_range90": [lo_o, hi_o], "corrected_range90": [lo_c, hi_c],
            "ranges_disjoint": bool(hi_o < lo_c or hi_c < lo_o),
            "mean_degree": _mean(r["mean_degree"] for r in rs),
        }
    return out


def _t2_prepare(cfg):
    return {}


T2_SIGNALS = {"strong": (1.0, 2.0, 1.0), "weak": (0.0, 0.01, 0.0)}


def _t2_signals(cfg):
    sig = cfg.params.get("signal", "both")
    if sig == "both":
        return ("strong", "weak")
    if sig not in T2_SIGNALS:
        raise ConfigurationError("params.signal must be strong, weak or both")
    return (sig,)


def _t2_run(cfg, k, ctx):
    """GRDPG block model, ASE covariates, independent multiplier bootstrap."""
    rows = []
    spec = three_block_model(cfg.rho if cfg.rho is not None else
                                   (PowerLaw(cfg.delta) if cfg.delta is not None else 1.0))
    d_emb = cfg.d or 3
    for j, sig in enumerate(_t2_signals(cfg)):
        dgp = GrdpgLinearDGP(z_coefs=T2_SIGNALS[sig])
        s = sample_grdpg(spec, cfg.n, dgp, seed=_seed(cfg, k, j))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            des = design_from_sample(s, CovariateRecipe(ase_dim=d_emb))
        fit = ols_fit(des)
        run = independent_multiplier_bootstrap(des, fit, cfg.B, seed=_seed(cfg, k, 100 + j))
        lo, hi = percentile_ci(run, cfg.level)
        cov = _covers(lo[:2], hi[:2], dgp.x_coefs)
        test = network_effect_test(fit, run, cfg.alpha)
        rows.append({"signal": sig, "run": k, "beta1": float(fit.beta[0]), "beta2": float(fit.beta[1]),
                     "cover_beta1": cov[0], "cover_beta2": cov[1], "statistic": test.statistic,
                     "p_value": test.p_value, "reject": test.reject, "flagged": run.n_flagged})
    return rows


def _t2_aggregate(rows, cfg, ctx):
    out = {}
    for sig, rs in _group(rows, "signal").items():
        out[sig] = {"runs": len(rs),
                    "coverage_beta1": _mean(float(r["cover_beta1"]) for r in rs),
                    "coverage_beta2": _mean(float(r["cover_beta2"]) for r in rs),
                    "rejection_rate": _mean(float(r["reject"]) for r in rs)}
    return out


T3_NAMES = ("intercept", "x1", "x2", "z")


def _t3_prepare(cfg):
    return {}


def _t3_run(cfg, k, ctx):
    """Population targets for the nonlinear response (one pass, ``mc`` ignored)."""
    if k > 0:
        return []
    rec = CovariateRecipe(motifs=(ROOTED_TWO_STAR,))
    rows = []
    for j, (kind, v) in enumerate(cfg.sparsities((-0.70, -0.40, -0.25))):
        spec = _spec_for(kind, v, InverseSumKernel())
        t = approximate_targets(NonlinearGraphonDGP(), spec, rec, N=cfg.targets_N, n=cfg.n,
                                seed=child_seed(cfg.seed, "targets", j))
        if j == 0:
            rows.append({"target": "beta_star", "sparsity": "-", **dict(zip(T3_NAMES, map(float, t.beta_star))),
                         **{f"se_{c}": float(e) for c, e in zip(T3_NAMES, t.mc_se)}})
        rows.append({"target": "beta_tilde", "sparsity": f"{kind}={v}",
                     **dict(zip(T3_NAMES, map(float, t.beta_tilde))),
                     **{f"se_{c}": float(e) for c, e in zip(T3_NAMES, t.mc_se_tilde)}})
    return rows


def _t3_aggregate(rows, cfg, ctx):
    return {f"{r['target']}[{r['sparsity']}]": {c: r[c] for c in T3_NAMES} for r in rows}


def _t4_prepare(cfg):
    rec = CovariateRecipe(motifs=(ROOTED_TWO_STAR,))
    out = {}
    for j, (kind, v) in enumerate(cfg.sparsities((-0.70,))):
        spec = _spec_for(kind, v, InverseSumKernel())
        t = approximate_targets(NonlinearGraphonDGP(), spec, rec, N=cfg.targets_N, n=cfg.n,
                                seed=child_seed(cfg.seed, "targets", j))
        out[f"{kind}={v}"] = {"beta_star": t.beta_star.tolist(), "beta_tilde": t.beta_tilde.tolist()}
    return out


def _t4_run(cfg, k, ctx):
    """Nonlinear response: bootstrap coverage for corrected and uncorrected fits."""
    rec = CovariateRecipe(motifs=(ROOTED_TWO_STAR,))
    rows = []
    for j, (kind, v) in enumerate(cfg.sparsities((-0.70,))):
        key = f"{kind}={v}"
        star = ctx[key]["beta_star"]
        tilde = ctx[key]["beta_tilde"]
        s = sample_graphon(_spec_for(kind, v, InverseSumKernel()), cfg.n, NonlinearGraphonDGP(),
                           seed=_seed(cfg, k, j))
        des = design_from_sample(s, rec)
        row = {"sparsity": key, "run": k}
        for variant, fit in (("corrected", bias_corrected_fit(des)), ("ols", ols_fit(des))):
            table = hajek_for_design(des, fit.corrected)
            run = linear_multiplier_bootstrap(fit, table, cfg.B, seed=_seed(cfg, k, 100 + j))
            lo, hi = percentile_ci(run, cfg.level)
            for c, b in zip(T3_NAMES, fit.beta):
                row[f"{variant}_{c}"] = float(b)
            for c, f in zip(T3_NAMES, _covers(lo, hi, star)):
                row[f"{variant}_star_cover_{c}"] = f
            if variant == "ols":
                for c, f in zip(T3_NAMES, _covers(lo, hi, tilde)):
                    row[f"ols_tilde_cover_{c}"] = f
        rows.append(row)
    return rows


def _t4_aggregate(rows, cfg, ctx):
    out = {}
    for key, rs in _group(rows, "sparsity").items():
        o = {"runs": len(rs)}
        for block in ("corrected_star", "ols_star", "ols_tilde"):
            o[block] = {c: _mean(float(r[f"{block}_cover_{c}"]) for r in rs) for c in T3_NAMES}
        out[key] = o
    return out


def _ds_prepare(cfg):
    return {}


def _ds_run(cfg, k, ctx):
    """Neighbourhood-average covariate, down-sampled OLS, independent bootstrap
    on the selected nodes.  ``params.kernel`` picks the graphon."""
    kernel = KERNELS[cfg.params.get("kernel", "affine_product")]()
    rows = []
    for j, (kind, v) in enumerate(cfg.sparsities((-0.4,))):
        dgp = NeighborhoodAverageDGP()
        s = sample_graphon(_spec_for(kind, v, kernel), cfg.n, dgp, seed=_seed(cfg, k, j))
        rec = CovariateRecipe(composite=(("neighborhood_average", 1),), x_columns=(0,))
        des = design_from_sample(s, rec)
        lam = float(s.graph.degree.mean())
        m = choose_downsample_size(lam, "neighborhood_average", cfg.n, n_params=des.p + des.q)
        fit = downsample_fit(des, m, seed=_seed(cfg, k, 50 + j))
        run = independent_multiplier_bootstrap(des, fit, cfg.B, seed=_seed(cfg, k, 100 + j))
        lo, hi = percentile_ci(run, cfg.level)
        cov = _covers(lo, hi, s.truth["beta"])
        rows.append({"sparsity": f"{kind}={v}", "run": k, "m": m, "mean_degree": lam,
                     "beta_intercept": float(fit.beta[0]), "beta_z": float(fit.beta[1]),
                     "cover_intercept": cov[0], "cover_z": cov[1]})
    return rows


def _ds_aggregate(rows, cfg, ctx):
    out = {}
    for key, rs in _group(rows, "sparsity").items():
        out[key] = {"runs": len(rs), "mean_m": _mean(r["m"] for r in rs),
                    "coverage_intercept": _mean(float(r["cover_intercept"]) for r in rs),
                    "coverage_z": _mean(float(r["cover_z"]) for r in rs)}
    return out


def _custom_prepare(cfg):
    return {}


def _custom_run(cfg, k, ctx):
    """Graphon model with ``params.kernel`` and ``params.response``; fits OLS
    (and the corrected fit when every network column is a motif) on the
    configured motifs, ``d`` embedding columns or ``downsample`` covariate."""
    kernel = KERNELS[cfg.params.get("kernel", "inverse_sum")]()
    dgp = RESPONSES[cfg.params.get("response", "linear")]()
    motifs = cfg.motifs or ((ROOTED_TWO_STAR,) if cfg.d is None and cfg.downsample is None else ())
    composite = ((cfg.downsample, 1 if cfg.downsample == "neighborhood_average" else None),) if cfg.downsample else ()
    rec = CovariateRecipe(motifs=motifs, ase_dim=cfg.d, composite=composite)
    rows = []
    for j, (kind, v) in enumerate(cfg.sparsities((-0.4,))):
        s = sample_graphon(_spec_for(kind, v, kernel), cfg.n, dgp, seed=_seed(cfg, k, j))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            des = design_from_sample(s, rec)
        truth = s.truth.get("beta")
        fits = [("ols", ols_fit(des))]
        if des.q and all(m is not None for m in des.motif_columns()):
            fits.append(("corrected", bias_corrected_fit(des)))
        row = {"sparsity": f"{kind}={v}", "run": k}
        for variant, fit in fits:
            if des.motif_columns() and any(m is not None for m in des.motif_columns()):
                run = linear_multiplier_bootstrap(fit, hajek_for_design(des, fit.corrected), cfg.B,
                                                  seed=_seed(cfg, k, 100 + j))
            else:
                run = independent_multiplier_bootstrap(des, fit, cfg.B, seed=_seed(cfg, k, 100 + j))
            lo, hi = percentile_ci(run, cfg.level)
            for c, b in zip(des.names, fit.beta):
                row[f"{variant}:{c}"] = float(b)
            if truth is not None and len(truth) == fit.beta.size:
                for c, f in zip(des.names, _covers(lo, hi, truth)):
                    row[f"{variant}:cover:{c}"] = f
        rows.append(row)
    return rows


def _custom_aggregate(rows, cfg, ctx):
    out = {}
    for key, rs in _group(rows, "sparsity").items():
        cols = [c for c in rs[0] if c not in ("sparsity", "run")]
        out[key] = {"runs": len(rs)}
        for c in cols:
            out[key][("coverage:" + c.replace(":cover:", ":")) if ":cover:" in c else ("mean:" + c)] = \
                _mean(float(r[c]) for r in rs)
    return out


@dataclass(frozen=True)
class Experiment:
    prepare: Callable
    run: Callable
    aggregate: Callable
    version: int = 1


REGISTRY = {
    "fig1_bias": Experiment(_fig1_prepare, _fig1_run, _fig1_aggregate),
    "table2_grdpg": Experiment(_t2_prepare, _t2_run, _t2_aggregate),
    "table3_targets": Experiment(_t3_prepare, _t3_run, _t3_aggregate),
    "table4_coverage": Experiment(_t4_prepare, _t4_run, _t4_aggregate),
    "downsample_coverage": Experiment(_ds_prepare, _ds_run, _ds_aggregate),
    "custom": Experiment(_custom_prepare, _custom_run, _custom_aggregate),
}


# ---------------------------------------------------------------------------
# bundles
# ---------------------------------------------------------------------------

def _versions() -> dict:
    import scipy
    from . import __version__
    return {"netreg": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


@dataclass(eq=False)
class ResultBundle:
    config: ExperimentConfig
    runs: list
    aggregates: dict
    context: dict
    provenance: dict

    def recompute(self) -> dict:
        exp = REGISTRY[self.config.experiment]
        return exp.aggregate(self.runs, self.config, self.context)

    def check(self) -> None:
        """Aggregates must be reproducible from the per-run rows."""
        if nio.dumps(self.recompute()) != nio.dumps(self.aggregates):
            raise SchemaError("stored aggregates do not match the per-run results")
        if self.provenance.get("config_hash") != self.config.digest():
            raise SchemaError("config hash does not match the configuration")

    def to_dict(self) -> dict:
        return {"config": self.config.effective(), "provenance": self.provenance,
                "context": self.context, "aggregates": self.aggregates, "runs": self.runs}

    def runs_csv(self) -> str:
        cols = []
        for r in self.runs:
            for c in r:
                if c not in cols:
                    cols.append(c)
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.runs:
            w.writerow([_cell(r.get(c, "")) for c in cols])
        return buf.getvalue()

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = self.config.experiment
        paths = {"bundle": out / f"{name}.bundle.json", "runs": out / f"{name}.runs.csv",
                 "aggregates": out / f"{name}.aggregates.json"}
        paths["bundle"].write_text(nio.dumps(self.to_dict()))
        paths["runs"].write_text(self.runs_csv())
        paths["aggregates"].write_text(nio.dumps(self.aggregates))
        return paths

    @classmethod
    def load(cls, path) -> "ResultBundle":
        d = json.loads(Path(path).read_text())
        b = cls(ExperimentConfig.from_dict(d["config"]), d["runs"], d["aggregates"], d["context"], d["provenance"])
        b.check()
        return b

    def table(self) -> str:
        lines = [f"{self.config.experiment}  (n={self.config.n}, mc={self.config.mc}, seed={self.config.seed})"]
        for key, agg in self.aggregates.items():
            lines.append(f"[{key}]")
            for k, v in agg.items():
                if isinstance(v, dict):
                    lines.append(f"  {k}: " + ", ".join(f"{a}={_short(b)}" for a, b in v.items()))
                else:
                    lines.append(f"  {k}: {_short(v)}")
        return "\n".join(lines)


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def _short(v):
    if isinstance(v, float):
        return f"{v:.4f}"
    if isinstance(v, list):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _one(args):
    cfg, k, ctx = args
    return REGISTRY[cfg.experiment].run(cfg, k, ctx)


def run_experiment(cfg: ExperimentConfig, progress: Optional[Callable[[int], None]] = None) -> ResultBundle:
    exp = REGISTRY[cfg.experiment]
    ctx = nio._jsonable(exp.prepare(cfg))
    iters = 1 if cfg.experiment == "table3_targets" else cfg.mc
    jobs = [(cfg, k, ctx) for k in range(iters)]
    results = []
    if cfg.workers > 1 and iters > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            # map yields in submission order, so rows land in iteration order
            for k, rows in enumerate(pool.map(_one, jobs)):
                results.extend(rows)
                if progress:
                    progress(k)
    else:
        for k, job in enumerate(jobs):
            results.extend(_one(job))
            if progress:
                progress(k)
    runs = nio._jsonable(results)
    aggregates = nio._jsonable(exp.aggregate(runs, cfg, ctx))
    prov = {"config_hash": cfg.digest(), "seed": cfg.seed, "experiment_version": exp.version,
            "versions": _versions()}
    bundle = ResultBundle(cfg, runs, aggregates, ctx, prov)
    bundle.check()
    return bundle
