"""Tree embeddings of finite metrics and graphs with scaling distortion.

The package builds three kinds of embeddings and audits them:

- ultrametrics over arbitrary finite metrics, where all but an eps
  fraction of pairs stretch by at most O(sqrt(1/eps));
- deterministic spanning trees of weighted graphs with the same
  per-pair scaling guarantee and constant average distortion;
- randomized spanning trees whose expected distortion profile trades
  against cluster growth through a pluggable density.

`evaluate` turns any of these into distortion reports;
`cli` exposes the whole pipeline as the `treebed` command.
"""

from .cutting import CutCertificate, DeletedInterval, audit_cut_radius, shell_cut
from .errors import (
    CutSelectionError,
    DisconnectedGraphError,
    FormatError,
    InvariantError,
    MetricError,
    TreebedError,
)
from .evaluate import (
    DistortionReport,
    ScalingProfile,
    check_scaling_guarantee,
    count_bad_pairs,
    lq_distortion,
    make_report,
    pairwise_distortions,
    scaling_profile,
    tree_all_pairs,
    verify_decompose_budget,
    verify_radius_invariants,
)
from .generators import GeneratorSpec, generate
from .graphs import WeightedGraph, shortest_path_metric
from .metrics import (
    MetricSpace,
    PseudoMetricView,
    ball,
    cone_metric,
    diameter,
    find_half_center,
    induced_submetric,
    radius_from,
)
from .prob import (
    ConeSampler,
    DensityFunction,
    EnsembleResult,
    build_prob_spanning_tree,
    choose_gamma,
    cone_radius_cdf,
    cone_radius_pdf,
    local_density,
    make_density,
    prob_star_partition,
    sample_cone_radius,
    sample_central_radius,
    sample_tree_ensemble,
    validate_density,
)
from .spantree import (
    CONSTANTS,
    ClusterParams,
    Constants,
    ConstructionTrace,
    SpanningTree,
    StarPartition,
    TraceNode,
    build_spanning_tree,
    decompose,
    hierarchical_star_partition,
    star_partition,
)
from .ultrametric import (
    UltrametricTree,
    build_ultrametric,
    choose_cut_radius,
    epsilon_hat,
    partition_step,
    ultrametric_distance,
)

__version__ = "0.1.0"

__all__ = [
    "CONSTANTS",
    "ClusterParams",
    "ConeSampler",
    "Constants",
    "ConstructionTrace",
    "CutCertificate",
    "CutSelectionError",
    "DeletedInterval",
    "DensityFunction",
    "DisconnectedGraphError",
    "DistortionReport",
    "EnsembleResult",
    "FormatError",
    "GeneratorSpec",
    "InvariantError",
    "MetricError",
    "MetricSpace",
    "PseudoMetricView",
    "ScalingProfile",
    "SpanningTree",
    "StarPartition",
    "TraceNode",
    "TreebedError",
    "UltrametricTree",
    "WeightedGraph",
    "audit_cut_radius",
    "ball",
    "build_prob_spanning_tree",
    "build_spanning_tree",
    "build_ultrametric",
    "check_scaling_guarantee",
    "choose_cut_radius",
    "choose_gamma",
    "cone_metric",
    "cone_radius_cdf",
    "cone_radius_pdf",
    "count_bad_pairs",
    "decompose",
    "diameter",
    "epsilon_hat",
    "find_half_center",
    "generate",
    "hierarchical_star_partition",
    "induced_submetric",
    "local_density",
    "lq_distortion",
    "make_density",
    "make_report",
    "pairwise_distortions",
    "partition_step",
    "prob_star_partition",
    "radius_from",
    "sample_central_radius",
    "sample_cone_radius",
    "sample_tree_ensemble",
    "scaling_profile",
    "shell_cut",
    "shortest_path_metric",
    "star_partition",
    "tree_all_pairs",
    "ultrametric_distance",
    "validate_density",
    "verify_decompose_budget",
    "verify_radius_invariants",
]
