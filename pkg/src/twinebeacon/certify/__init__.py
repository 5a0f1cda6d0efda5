"""Entropy certification for loophole-free Bell test trials."""
from .entropy import (
    Accumulation,
    EntropyCertificate,
    accumulate,
    certified_bits,
    certify,
    entropy_threshold,
    min_entropy_bound,
    success_target,
)
from .mle import MIN_CALIBRATION_TRIALS, MleResult, convex_weights, log_likelihood, mle_conditional
from .pef import (
    BetaChoice,
    Pef,
    PefCheck,
    PefSolution,
    constraint_matrix,
    default_beta_grid,
    expected_rate,
    n_expected,
    optimize_beta,
    optimize_pef,
    optimize_pef_solution,
    pef_lhs,
    reference_weights,
    validate_pef,
)
from .polytope import (
    TSIRELSON,
    ConditionalDistribution,
    TrialModel,
    check_conditional,
    chsh_forms,
    correlators,
    marginals,
    ns_affine,
    ns_vertices,
    settings_vertices,
    tsirelson_cut,
)
from .trials import TrialBlock, TrialRecord, cell, file_digest
