"""Causal corruption benchmarks: model corruptions as a causal graph,
sample their parameters deterministically, render them onto synthetic
multi-object scenes, and score external predictions with bootstrap CIs
and severity curves.
"""

from .dataset import (
    REGIME_LONGTAIL,
    REGIME_OOD_CHAIN,
    REGIME_OOD_IID,
    REGIMES,
    DatasetManifest,
    RegimeConfig,
    VerifyReport,
    generate_dataset,
    mix_longtail,
    verify_dataset,
    write_scenes,
)
from .distributions import (
    DiscreteUniform,
    Distribution,
    HalfNormal,
    Mixture,
    Normal,
    PointMass,
    Uniform,
    sample_dist,
)
from .dsl import (
    SHIPPED_SPECS,
    Diagnostic,
    SpecDocument,
    load_spec,
    parse_spec,
    serialize_spec,
    shipped_spec,
    shipped_spec_text,
    validate_spec,
)
from .errors import (
    ArityError,
    CausalCorruptError,
    ConfigError,
    CyclicGraphError,
    DatasetLayoutError,
    EmptySampleError,
    GraphStructureError,
    InvalidDistributionError,
    MechanismDomainError,
    OperatorDomainError,
    PredictionLayoutError,
    ProbabilityError,
    SceneSourceError,
    ShapeMismatchError,
    SpecSyntaxError,
    SpecValidationError,
    UnknownNodeError,
    UnknownOperatorError,
    UnknownParamError,
)
from .evaluate import (
    BinStat,
    BootstrapCI,
    Match,
    bootstrap_ci,
    curves_from_report,
    evaluate_predictions,
    load_report,
    match_masks,
    mean_iou,
    mse,
    severity_curve,
    write_curves_csv,
    write_report,
)
from .ops import (
    OPERATORS,
    Severity,
    apply,
    clamp_params,
    identity_params,
    is_identity,
    operator_info,
    param_ranges,
    psnr,
    severity_normalize,
    similarity,
)
from .predictors import (
    segment_by_palette,
    write_ground_truth_predictions,
    write_reference_predictions,
)
from .rng import (
    STREAM_BOOTSTRAP,
    STREAM_LONGTAIL,
    STREAM_OP_NOISE,
    STREAM_SCENE,
    STREAM_TRACE,
    generator_for,
    mix_seed,
)
from .scene import Scene, SceneConfig, SceneObject, generate_scene, scene_metadata
from .scm import (
    CausalGraph,
    CorruptionNode,
    Intervention,
    SampledTrace,
    apply_intervention,
    sample_trace,
    topological_order,
)
from .svgplot import render_line_chart

__version__ = "0.1.0"

__all__ = [
    "ArityError",
    "BinStat",
    "BootstrapCI",
    "CausalCorruptError",
    "CausalGraph",
    "ConfigError",
    "CorruptionNode",
    "CyclicGraphError",
    "DatasetLayoutError",
    "DatasetManifest",
    "Diagnostic",
    "DiscreteUniform",
    "Distribution",
    "EmptySampleError",
    "GraphStructureError",
    "HalfNormal",
    "Intervention",
    "InvalidDistributionError",
    "Match",
    "MechanismDomainError",
    "Mixture",
    "Normal",
    "OPERATORS",
    "OperatorDomainError",
    "PointMass",
    "PredictionLayoutError",
    "ProbabilityError",
    "REGIMES",
    "REGIME_LONGTAIL",
    "REGIME_OOD_CHAIN",
    "REGIME_OOD_IID",
    "RegimeConfig",
    "SHIPPED_SPECS",
    "STREAM_BOOTSTRAP",
    "STREAM_LONGTAIL",
    "STREAM_OP_NOISE",
    "STREAM_SCENE",
    "STREAM_TRACE",
    "SampledTrace",
    "Scene",
    "SceneConfig",
    "SceneObject",
    "SceneSourceError",
    "Severity",
    "ShapeMismatchError",
    "SpecDocument",
    "SpecSyntaxError",
    "SpecValidationError",
    "Uniform",
    "UnknownNodeError",
    "UnknownOperatorError",
    "UnknownParamError",
    "VerifyReport",
    "apply",
    "apply_intervention",
    "bootstrap_ci",
    "clamp_params",
    "curves_from_report",
    "evaluate_predictions",
    "generate_dataset",
    "generate_scene",
    "generator_for",
    "identity_params",
    "is_identity",
    "load_report",
    "load_spec",
    "match_masks",
    "mean_iou",
    "mix_longtail",
    "mix_seed",
    "mse",
    "operator_info",
    "param_ranges",
    "parse_spec",
    "psnr",
    "render_line_chart",
    "sample_dist",
    "sample_trace",
    "scene_metadata",
    "segment_by_palette",
    "serialize_spec",
    "severity_curve",
    "severity_normalize",
    "shipped_spec",
    "shipped_spec_text",
    "similarity",
    "topological_order",
    "validate_spec",
    "verify_dataset",
    "write_curves_csv",
    "write_ground_truth_predictions",
    "write_reference_predictions",
    "write_report",
    "write_scenes",
]
