"""Spectral laboratory for weighted space-time smoothing estimates.

The package measures best constants in smoothing inequalities for
dispersive equations i u_t + a(D) u = f on periodic boxes, builds the
frequency-warping canonical transforms that reduce general symbols to
normal forms, and checks the operator identities behind those reductions
on the discrete grid.
"""

from .canonical import (
    Cutoff,
    Diffeomorphism,
    ReductionPlan,
    analytic_cone_cutoff,
    ball_cutoff,
    build_partition,
    build_reduction,
    conic_cutoff,
    operator_norm_weighted,
    transform_adjoint_apply,
    transform_apply,
    transform_inverse_adjoint_apply,
    transform_inverse_apply,
)
from .estimates import (
    EstimateSpec,
    HomogeneousMap,
    InhomogeneousMap,
    PointwiseMap,
    Resolution,
    combined_estimate,
    default_directions,
    estimate_constant,
    low_high_split,
    obstruction_report,
    power_iterate,
    resolve_multiplier,
    verify_model,
    verify_via_reduction,
)
from .evolution import (
    TimeWindow,
    duhamel_adjoint,
    duhamel_solve,
    kernel_k,
    propagate,
    resolvent_solve,
)
from .fields import (
    BumpEnsemble,
    SourceMixture,
    gaussian_field,
    random_band_ensemble,
    random_source,
)
from .grids import (
    Field,
    SpaceTimeField,
    UniformGrid,
    Weight,
    multiplier_apply,
    weighted_spacetime_norm,
)
from .config import ConfigError, load_config, validate_config
from .experiments import ExperimentResult, run_experiment, write_plot_data
from .plots import render_figures
from .reports import ConstantReport, read_report, write_report
from .symbols import Symbol, classify, make_symbol, model_symbol

__version__ = "0.1.0"

__all__ = [
    "BumpEnsemble",
    "ConfigError",
    "ConstantReport",
    "Cutoff",
    "Diffeomorphism",
    "EstimateSpec",
    "ExperimentResult",
    "Field",
    "HomogeneousMap",
    "InhomogeneousMap",
    "PointwiseMap",
    "ReductionPlan",
    "Resolution",
    "SourceMixture",
    "SpaceTimeField",
    "Symbol",
    "TimeWindow",
    "UniformGrid",
    "Weight",
    "analytic_cone_cutoff",
    "ball_cutoff",
    "build_partition",
    "build_reduction",
    "classify",
    "combined_estimate",
    "conic_cutoff",
    "default_directions",
    "duhamel_adjoint",
    "duhamel_solve",
    "estimate_constant",
    "gaussian_field",
    "kernel_k",
    "load_config",
    "low_high_split",
    "make_symbol",
    "model_symbol",
    "multiplier_apply",
    "obstruction_report",
    "operator_norm_weighted",
    "power_iterate",
    "propagate",
    "random_band_ensemble",
    "random_source",
    "read_report",
    "render_figures",
    "resolve_multiplier",
    "resolvent_solve",
    "run_experiment",
    "transform_adjoint_apply",
    "transform_apply",
    "transform_inverse_adjoint_apply",
    "transform_inverse_apply",
    "validate_config",
    "verify_model",
    "verify_via_reduction",
    "weighted_spacetime_norm",
    "write_plot_data",
    "write_report",
]
