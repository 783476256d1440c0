"""Transductive multi-view embedding and label propagation for zero-shot learning.

The package turns a labeled auxiliary dataset plus unlabeled target data
into target-class predictions without target labels: semantic projections
bridge the views, a multi-view correlation embedding aligns them, and
label propagation over heterogeneous hypergraphs assigns classes.
"""
from .annotation import (
    CrossViewMap,
    NameRanking,
    Vocabulary,
    class_description,
    cross_view_map,
    describe,
    instance_annotation,
    load_vocabulary,
    prototype_to_name,
    rank_by_cosine,
    save_vocabulary,
)
from .data import (
    Dataset,
    LabelMatrix,
    PrototypeSet,
    ViewMatrix,
    load_dataset,
    load_labels,
    load_matrix,
    load_prototypes,
    prototypes_from_instances,
    save_labels,
    save_matrix,
    save_prototypes,
    write_manifest,
)
from .embedding import (
    EmbeddedView,
    MvccaModel,
    cosine,
    decorrelation_residual,
    embed,
    fit_mvcca,
    load_mvcca,
    save_mvcca,
    total_distance_objective,
    whitening_residual,
)
from .errors import (
    ConfigError,
    DegenerateBandwidth,
    DimensionMismatch,
    DisjointnessViolated,
    MetricsError,
    MissingView,
    MvzslError,
    NoSupervision,
    NonFiniteData,
    ParseFailure,
    SingularPropagation,
    SingularSystem,
)
from .experiment import (
    ExperimentConfig,
    RunRecord,
    mean_accuracy,
    merge_config,
    run_experiment,
    run_grid,
    write_run_record,
)
from .graphs import (
    GRAPH_KINDS,
    Hyperedge,
    NodeSet,
    SimilarityGraph,
    build_graph_suite,
    build_hetero_hypergraph,
    build_homo_hypergraph,
    build_two_graph,
    load_graph,
    median_bandwidth,
    node_similarity,
    save_graph,
    zscore,
)
from .metrics import (
    MetricsReport,
    attribute_f_measure,
    average_precision,
    classification_metrics,
    compute_metrics,
    confusion_counts,
    mean_average_precision,
)
from .projection import (
    ProjectionModel,
    apply_projection,
    default_ridge,
    load_projection,
    save_projection,
    train_projection,
)
from .propagation import (
    PropagationResult,
    RecognizeConfig,
    WalkModel,
    embed_prototypes,
    fuse_walk,
    graph_posterior,
    per_graph_transition,
    propagate,
    recognize,
    stationary_distribution,
)
from .synth import SynthConfig, SynthResult, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CrossViewMap",
    "Dataset",
    "DegenerateBandwidth",
    "DimensionMismatch",
    "DisjointnessViolated",
    "EmbeddedView",
    "ExperimentConfig",
    "GRAPH_KINDS",
    "Hyperedge",
    "LabelMatrix",
    "MetricsError",
    "MetricsReport",
    "MissingView",
    "MvccaModel",
    "MvzslError",
    "NameRanking",
    "NoSupervision",
    "NodeSet",
    "NonFiniteData",
    "ParseFailure",
    "ProjectionModel",
    "PropagationResult",
    "PrototypeSet",
    "RecognizeConfig",
    "RunRecord",
    "SimilarityGraph",
    "SingularPropagation",
    "SingularSystem",
    "SynthConfig",
    "SynthResult",
    "ViewMatrix",
    "Vocabulary",
    "WalkModel",
    "apply_projection",
    "attribute_f_measure",
    "average_precision",
    "build_graph_suite",
    "build_hetero_hypergraph",
    "build_homo_hypergraph",
    "build_two_graph",
    "class_description",
    "classification_metrics",
    "compute_metrics",
    "confusion_counts",
    "cosine",
    "cross_view_map",
    "decorrelation_residual",
    "default_ridge",
    "describe",
    "embed",
    "embed_prototypes",
    "fit_mvcca",
    "fuse_walk",
    "generate_synthetic",
    "graph_posterior",
    "instance_annotation",
    "load_dataset",
    "load_graph",
    "load_labels",
    "load_matrix",
    "load_mvcca",
    "load_projection",
    "load_prototypes",
    "load_vocabulary",
    "mean_accuracy",
    "mean_average_precision",
    "median_bandwidth",
    "merge_config",
    "node_similarity",
    "per_graph_transition",
    "propagate",
    "prototype_to_name",
    "prototypes_from_instances",
    "rank_by_cosine",
    "recognize",
    "run_experiment",
    "run_grid",
    "save_graph",
    "save_labels",
    "save_matrix",
    "save_mvcca",
    "save_projection",
    "save_prototypes",
    "save_vocabulary",
    "stationary_distribution",
    "total_distance_objective",
    "train_projection",
    "whitening_residual",
    "write_manifest",
    "write_run_record",
    "zscore",
]
