"""Linear regression with network-derived covariates.

Simulate sparse graphon and GRDPG networks, compute local subgraph frequencies
and spectral embeddings, fit ordinary, bias-corrected and down-sampled least
squares, and quantify uncertainty with multiplier bootstraps.
"""

from .bootstrap import (
    BootstrapRun, TestResult, hajek_for_design, independent_multiplier_bootstrap,
    linear_multiplier_bootstrap, network_effect_test, percentile_ci, run_bootstrap,
)
from .errors import (
    BootstrapFailure, CapabilityError, ComplexityError, ConfigurationError, DegenerateGraphError,
    NetregError, RankDeficiencyError, SchemaError,
)
from .estimators import (
    ColumnTag, CovariateRecipe, Design, FitResult, TargetApprox, approximate_targets,
    bias_corrected_fit, build_design, choose_downsample_size, composite_covariate,
    design_from_sample, downsample_fit, ols_fit,
)
from .graph import Graph, edge_density
from .graphgen import (
    AffineProductKernel, ConstantKernel, FunctionDGP, FunctionKernel, GraphonSpec, GrdpgLinearDGP,
    GrdpgSpec, InverseSumKernel, LinearGraphonDGP, NeighborhoodAverageDGP, NonlinearGraphonDGP,
    PowerLaw, Sample, sample_graphon, sample_grdpg, three_block_model,
)
from .motifs import (
    HajekTable, MotifDecomposition, MotifSpec, builtin_motif, count_global, count_local,
    hajek_projection, leading_term, merge_motifs, quadratic_identity_check,
)
from .spectral import Embedding, ase, block_ase, procrustes_align

__version__ = "0.1.0"
