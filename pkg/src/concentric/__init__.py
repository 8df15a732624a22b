"""Exact computation and estimation for concentric-ring binary distributions."""
from .dependence import (
    MeasureSet,
    TwoByTwo,
    conditional_pair_table,
    correlation_matrix,
    correlation_matrix_general,
    csd,
    measures,
    reversal_analysis,
)
from .errors import (
    CapacityError,
    ConcentricError,
    DataError,
    DomainError,
    InconsistencyError,
    NonIdentifiableError,
    NumericalError,
    PatternOverflowError,
    UndefinedMeasureError,
    UnsupportedError,
)
from .estimation import (
    EMConfig,
    EMTrace,
    Estimate,
    closed_form_latent,
    em_estep,
    em_fit,
    em_mstep,
    grid_mle_oracle,
    loglik,
    mle_observed,
    mom_estimate,
    T_term,
)
from .model import (
    IndexStats,
    ModelSpec,
    ProbVector,
    alpha_to_rho,
    conditional_root,
    index_stats,
    integer_pattern,
    joint_vector_direct,
    joint_vector_kron,
    joint_vector_product,
    marginal_leaves,
    plan_sample_size,
    rho_to_alpha,
    sample,
)
from .tables import CountTable
from .transforms import (
    InteractionVector,
    central_from_raw,
    central_moments,
    inverse_transform,
    kron_apply,
    leaf_linear_interactions,
    leaf_loglinear,
    linear_interactions,
    loglinear_interactions,
    raw_moments,
)

__version__ = "0.1.0"
