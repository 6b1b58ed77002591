"""``netreg`` command line.

Subcommands: ``simulate``, ``fit``, ``bootstrap``, ``test-network-effect``,
``ase`` and ``count-motifs``.  Output files go to ``--output-dir``, else to
``$NETREG_OUTPUT_DIR``, else to the working directory.

Simulation config files are JSON objects whose keys are the fields of
:class:`netreg.experiments.ExperimentConfig`; command-line flags override them.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io as nio
from .bootstrap import (
    DEFAULT_B, hajek_for_design, independent_multiplier_bootstrap, linear_multiplier_bootstrap,
    network_effect_test, percentile_ci,
)
from .errors import ConfigurationError, NetregError, SchemaError
from .estimators import (
    CovariateRecipe, Design, bias_corrected_fit, build_design, choose_downsample_size,
    downsample_fit, ols_fit,
)
from .experiments import DESK_N, FULL_N, REGISTRY, ExperimentConfig, run_experiment
from .graph import edge_density
from .motifs import builtin_motif, count_global, count_local
from .spectral import ase, block_ase

OUTPUT_ENV = "NETREG_OUTPUT_DIR"


def _output_dir(args) -> Path:
    d = args.output_dir or os.environ.get(OUTPUT_ENV) or "."
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _motif_list(values):
    out = []
    for v in values or ():
        for part in _split_top(v):
            out.append(builtin_motif(part))
    return tuple(out)


def _split_top(text: str):
    """Split on commas outside parentheses: ``k_star(3),triangle``."""
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur.strip())
    return parts


# ---------------------------------------------------------------------------
# data pipeline shared by fit / bootstrap / test-network-effect
# ---------------------------------------------------------------------------

def _add_data_args(p):
    p.add_argument("--graph", required=True, help="edge list CSV (src,dst)")
    p.add_argument("--covariates", required=True, help="node table CSV holding the response and covariates")
    p.add_argument("--response", default="y", help="response column (default: y)")
    p.add_argument("--x-columns", default=None, help="comma-separated covariate columns (default: all others)")
    p.add_argument("--no-intercept", action="store_true", help="do not prepend an intercept column")
    p.add_argument("--motifs", action="append", help="motif covariates, e.g. rooted_k_star(2),triangle")
    p.add_argument("--motif-file", action="append", help="motif in edge-list text form")
    p.add_argument("--d", type=int, default=None, help="adjacency spectral embedding dimension")
    p.add_argument("--blocks", default=None, help="node,block CSV for block-wise embedding")
    p.add_argument("--composite", action="append", default=[],
                   help="transitivity, or neighborhood_average:COLUMN")
    p.add_argument("--corrected", action="store_true", help="bias-corrected fit (motif columns only)")
    p.add_argument("--downsample", default=None, help="down-sample size m, or 'auto'")
    p.add_argument("--downsample-seed", type=int, default=0)
    p.add_argument("--downsample-selection", default="seeded_random", choices=("seeded_random", "first_m"))


def load_design(args) -> Design:
    g_probe = nio.read_graph_csv(args.graph)
    rows = nio.read_node_table(args.covariates).n
    table = nio.read_node_table(args.covariates, n=max(g_probe.n, rows))
    g = nio.read_graph_csv(args.graph, n=table.n)
    Y = table.column(args.response)
    if args.x_columns:
        xcols = [c.strip() for c in args.x_columns.split(",") if c.strip()]
    else:
        xcols = [c for c in table.columns if c != args.response]
    X = table.select(xcols)
    names = tuple(xcols)
    if not args.no_intercept:
        X = np.column_stack([np.ones(table.n), X])
        names = ("intercept",) + names
    elif X.shape[1] == 0:
        raise ConfigurationError("no covariate columns and no intercept")
    motifs = _motif_list(args.motifs) + tuple(nio.read_motif(f) for f in (args.motif_file or ()))
    composite = []
    for c in args.composite:
        kind, _, col = c.partition(":")
        if kind == "neighborhood_average":
            if col not in names:
                raise SchemaError(f"neighbourhood average needs a covariate column, got {col!r}")
            composite.append((kind, names.index(col)))
        elif kind == "transitivity":
            composite.append((kind, None))
        else:
            raise ConfigurationError(f"unknown composite covariate {kind!r}")
    blocks = nio.read_labels_csv(args.blocks, table.n) if args.blocks else None
    if blocks is not None and args.d is None:
        raise ConfigurationError("--blocks needs --d")
    if not motifs and args.d is None and not composite:
        # conventional covariates only
        return Design(Y, X, np.zeros((table.n, 0)), (), edge_density(g), g, not args.no_intercept, names)
    rec = CovariateRecipe(motifs=motifs, ase_dim=args.d, composite=tuple(composite))
    return build_design(g, X, Y, rec, intercept=not args.no_intercept, blocks=blocks, x_names=names)


def _downsample_kind(design: Design) -> str:
    kinds = {t.kind for t in design.provenance}
    if "composite" in kinds:
        details = {t.detail for t in design.provenance if t.kind == "composite"}
        return "transitivity" if "transitivity" in details else "neighborhood_average"
    return "grdpg_ase"


def fit_design(design: Design, args):
    if args.downsample is not None:
        if args.corrected:
            raise ConfigurationError("--corrected and --downsample are exclusive")
        if args.downsample == "auto":
            lam = float(design.graph.degree.mean())
            m = choose_downsample_size(lam, _downsample_kind(design), design.n, design.p + design.q)
        else:
            m = int(args.downsample)
        return downsample_fit(design, m, args.downsample_selection, args.downsample_seed)
    return bias_corrected_fit(design) if args.corrected else ols_fit(design)


def _scheme(design: Design, fit, requested: str) -> str:
    if requested != "auto":
        return requested
    has_motif = any(m is not None for m in design.motif_columns())
    return "linear" if has_motif and fit.rows is None else "independent"


def bootstrap_fit(design, fit, scheme, B, seed):
    scheme = _scheme(design, fit, scheme)
    if scheme == "linear":
        if fit.rows is not None:
            raise ConfigurationError("down-sampled fits use the independent scheme")
        return linear_multiplier_bootstrap(fit, hajek_for_design(design, fit.corrected), B, seed)
    return independent_multiplier_bootstrap(design, fit, B, seed)


def backward_eliminate(design: Design, args, steps: int):
    """Drop conventional covariates whose intervals contain zero, ``steps`` rounds at most.

    Every non-significant conventional column (intercept excluded) is removed
    in a round; elimination stops early when all remaining ones are
    significant.  Returns the final design and the dropped names per round.
    """
    history = []
    for _ in range(steps):
        fit = fit_design(design, args)
        run = bootstrap_fit(design, fit, args.scheme, args.B, args.seed)
        lo, hi = percentile_ci(run, args.level)
        start = 1 if design.intercept else 0
        drop = [j for j in range(start, design.p) if lo[j] <= 0.0 <= hi[j]]
        if not drop or len(drop) == design.p:
            break
        keep = [j for j in range(design.p) if j not in drop]
        history.append([design.x_names[j] for j in drop])
        design = Design(design.Y, design.X[:, keep], design.Zhat, design.provenance, design.rho_hat,
                        design.graph, design.intercept, tuple(design.x_names[j] for j in keep))
    return design, history


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
        if not isinstance(base, dict):
            raise ConfigurationError("config file must hold a JSON object")
    if args.experiment:
        base["experiment"] = args.experiment
    if "experiment" not in base:
        raise ConfigurationError("no experiment given (--experiment or config file)")
    if args.full_scale:
        base["n"] = FULL_N
    for key in ("n", "mc", "B", "seed", "d", "workers", "delta", "rho", "level", "alpha"):
        v = getattr(args, key)
        if v is not None:
            base[key] = v
    if args.deltas:
        base["deltas"] = [float(x) for x in args.deltas.split(",")]
    if args.targets_n is not None:
        base["targets_N"] = args.targets_n
    if args.motifs:
        base["motifs"] = [m.label for m in _motif_list(args.motifs)]
    for kv in args.param or ():
        k, _, v = kv.partition("=")
        base.setdefault("params", {})[k] = v
    out = _output_dir(args)
    base["output_dir"] = str(out)
    cfg = ExperimentConfig.from_dict(base)
    bundle = run_experiment(cfg)
    paths = bundle.write(out)
    print(bundle.table())
    print(f"config hash {cfg.digest()}")
    for k, p in paths.items():
        print(f"wrote {k}: {p}")
    return 0


def cmd_fit(args) -> int:
    design = load_design(args)
    history = None
    if args.backward_eliminate:
        design, history = backward_eliminate(design, args, args.backward_eliminate)
    fit = fit_design(design, args)
    d = fit.to_dict()
    d["provenance"] = [t.label for t in design.provenance]
    if history is not None:
        d["eliminated"] = history
    text = nio.dumps(d)
    if args.output:
        Path(_output_dir(args), args.output).write_text(text)
    sys.stdout.write(text)
    return 0


def _bootstrap_common(args):
    design = load_design(args)
    fit = fit_design(design, args)
    return design, fit, bootstrap_fit(design, fit, args.scheme, args.B, args.seed)


def cmd_bootstrap(args) -> int:
    design, fit, run = _bootstrap_common(args)
    out = _output_dir(args)
    stem = args.prefix
    (out / f"{stem}.replicates.csv").write_text(run.replicate_csv())
    summary = run.summary(args.level)
    (out / f"{stem}.summary.json").write_text(nio.dumps(summary))
    lo, hi = percentile_ci(run, args.level)
    for name, b, se, a, c in zip(fit.names, fit.beta, run.se(), lo, hi):
        print(f"{name:>24s}  {b: .6f}  se {se:.6f}  [{a: .6f}, {c: .6f}]")
    print(f"scheme {run.scheme}, B {run.B}, flagged {run.n_flagged}")
    return 0


def cmd_test(args) -> int:
    design, fit, run = _bootstrap_common(args)
    res = network_effect_test(fit, run, args.alpha)
    text = nio.dumps(res.to_dict())
    if args.output:
        Path(_output_dir(args), args.output).write_text(text)
    print(f"statistic {res.statistic:.6g}")
    print(f"critical value {res.critical_value:.6g}")
    print(f"p-value {res.p_value:.6g}")
    print("reject" if res.reject else "do not reject")
    return 0


def cmd_ase(args) -> int:
    g = nio.read_graph_csv(args.graph, n=args.n)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.blocks:
            emb = block_ase(g, nio.read_labels_csv(args.blocks, g.n), args.d)
        else:
            emb = ase(g, args.d)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    path = _output_dir(args) / args.output
    nio.write_embedding_csv(path, emb.Zhat)
    print(f"wrote {path}")
    return 0


def cmd_count(args) -> int:
    g = nio.read_graph_csv(args.graph, n=args.n)
    motifs = _motif_list(args.motifs) + tuple(nio.read_motif(f) for f in (args.motif_file or ()))
    if not motifs:
        raise ConfigurationError("no motif given")
    rho = edge_density(g)
    for m in motifs:
        print(f"{m.label}: global {count_global(g, m, rho)!r}")
    if args.output:
        cols = [m.label for m in motifs]
        vals = np.column_stack([count_local(g, m, rho).values for m in motifs])
        path = _output_dir(args) / args.output
        nio.write_node_table(path, cols, vals)
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netreg", description="Regression with network covariates.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=None, help=f"output directory (default: ${OUTPUT_ENV} or .)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo study")
    p.add_argument("--experiment", choices=sorted(REGISTRY))
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--n", type=int)
    p.add_argument("--full-scale", action="store_true", help=f"use n={FULL_N} instead of {DESK_N}")
    p.add_argument("--delta", type=float)
    p.add_argument("--deltas", help="comma-separated sparsity exponents")
    p.add_argument("--rho", type=float)
    p.add_argument("--mc", type=int)
    p.add_argument("--B", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--motifs", action="append")
    p.add_argument("--targets-n", type=int)
    p.add_argument("--level", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--param", action="append", help="study option KEY=VALUE")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit OLS, corrected or down-sampled regression")
    _add_data_args(p)
    p.add_argument("--backward-eliminate", type=int, default=0, metavar="ROUNDS",
                   help="rounds of dropping non-significant conventional covariates")
    p.add_argument("--scheme", default="auto", choices=("auto", "linear", "independent"))
    p.add_argument("--B", type=int, default=DEFAULT_B)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--output", default=None, help="also write the fit JSON to this file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bootstrap", parents=[common], help="multiplier bootstrap around a fit")
    _add_data_args(p)
    p.add_argument("--scheme", default="auto", choices=("auto", "linear", "independent"))
    p.add_argument("--B", type=int, default=DEFAULT_B)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--prefix", default="bootstrap")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("test-network-effect", parents=[common], help="bootstrap test of no network effect")
    _add_data_args(p)
    p.add_argument("--scheme", default="auto", choices=("auto", "linear", "independent"))
    p.add_argument("--B", type=int, default=DEFAULT_B)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("ase", parents=[common], help="adjacency spectral embedding")
    p.add_argument("--graph", required=True)
    p.add_argument("--n", type=int, default=None, help="number of nodes (default: largest id + 1)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--blocks", default=None)
    p.add_argument("--output", default="embedding.csv")
    p.set_defaults(func=cmd_ase)

    p = sub.add_parser("count-motifs", parents=[common], help="global and local motif frequencies")
    p.add_argument("--graph", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--motifs", action="append")
    p.add_argument("--motif-file", action="append")
    p.add_argument("--output", default=None, help="CSV of local frequencies")
    p.set_defaults(func=cmd_count)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NetregError, ValueError, NotImplementedError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"netreg {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
