"""Exact-rational channels, refinement and stability for privacy pipelines."""

from .linalg import (
    Channel,
    Matrix,
    SingularMatrixError,
    identity,
    invert,
    is_deterministic,
    is_stochastic,
    kron_power,
    kronecker,
    left_inverse,
    matmul,
    parse_rational,
    read_matrix_csv,
    write_matrix_csv,
)
from .mechanisms import (
    Adjacency,
    GeomParams,
    MaxRatio,
    NoWitnessError,
    RRParams,
    geometric_witness,
    random_response,
    realized_epsilon,
    rr_witness,
    truncated_geometric,
)
from .pipelines import (
    Pipeline,
    PostProcessor,
    Stability,
    StabilityReport,
    argmax_post,
    boolean_aggregator,
    counting_query,
    histogram_preprocessor,
    histograms,
    known_context_count,
    noisy_argmax_pipeline,
    stability_scan,
    sum_query,
    tally,
)
from .refinement import (
    Certificate,
    Precheck,
    RefinementVerdict,
    check_refinement,
    find_witness,
    instability_precheck,
    kron_refinement_witness,
    structural_stability_check,
)
from .utility import (
    LossFunction,
    Prior,
    ama_loss,
    builtin_loss,
    ghosh_remap_utility,
    posterior_uncertainty,
    prior_uncertainty,
)

__all__ = [
    "Adjacency",
    "ama_loss",
    "argmax_post",
    "boolean_aggregator",
    "builtin_loss",
    "Certificate",
    "Channel",
    "check_refinement",
    "counting_query",
    "find_witness",
    "geometric_witness",
    "GeomParams",
    "ghosh_remap_utility",
    "histogram_preprocessor",
    "histograms",
    "identity",
    "instability_precheck",
    "invert",
    "is_deterministic",
    "is_stochastic",
    "known_context_count",
    "kron_power",
    "kron_refinement_witness",
    "kronecker",
    "left_inverse",
    "LossFunction",
    "matmul",
    "Matrix",
    "MaxRatio",
    "noisy_argmax_pipeline",
    "NoWitnessError",
    "parse_rational",
    "Pipeline",
    "posterior_uncertainty",
    "PostProcessor",
    "Precheck",
    "Prior",
    "prior_uncertainty",
    "random_response",
    "read_matrix_csv",
    "realized_epsilon",
    "RefinementVerdict",
    "rr_witness",
    "RRParams",
    "SingularMatrixError",
    "Stability",
    "stability_scan",
    "StabilityReport",
    "structural_stability_check",
    "sum_query",
    "tally",
    "truncated_geometric",
    "write_matrix_csv",
]
