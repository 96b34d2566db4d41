"""Multi-attribute association network inference and characterization.

Edges between nodes are declared when the similarity of their attribute
measurements (single correlations, max/min aggregation, or canonical
correlation) survives hypothesis testing with false-discovery-rate control.
The package also characterizes the inferred graph, classifies edges and
nodes by per-attribute contribution, tests node classes for set
over-representation, and estimates edge-detection power by simulation.
"""

from . import errors
from .classify import (
    DEFAULT_THRESHOLD,
    EdgeClass,
    NodeClass,
    classify_edge,
    classify_network,
    classify_node,
    contribution_histogram,
)
from .enrichment import (
    EnrichmentReport,
    EnrichmentResult,
    GeneSetCollection,
    enrich,
    hypergeom_upper,
    load_gmt,
)
from .inference import (
    BartlettTest,
    FdrDecision,
    HomogeneityTest,
    bartlett_chi2,
    bh_fdr,
    chi2_sf,
    extreme_corr_mc_pvalue,
    extreme_corr_pvalue,
    extreme_corr_pvalue_two_sided,
    fisher_z,
    homogeneity_lrt,
    normal_sf,
)
from .network import (
    AttributeDataset,
    EdgeRecord,
    InferredNetwork,
    NetworkSummary,
    betweenness_values,
    clustering_values,
    degree_values,
    infer_network,
    jaccard,
    largest_connected_component,
    summary,
)
from .numkernel import (
    EigenResult,
    cholesky,
    corr_matrix,
    general_eigen,
    inverse,
    is_positive_definite,
    pearson_corr,
    sym_eigen,
)
from .similarity import (
    CanonicalSolution,
    K2Params,
    PairCorrelationStructure,
    aggregate_extreme,
    canonical_corr,
    canonical_corr_homogeneous,
    equal_corr_closed_form,
    k2_closed_form,
    k2_domain,
)
from .simulation import (
    PowerResult,
    PowerStudySpec,
    build_sigma,
    power_study,
    sample_mvn,
    slice_grid,
)

__version__ = "0.1.0"
