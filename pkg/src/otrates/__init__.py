"""Entropic optimal transport potentials and convergence-rate verification.

Closed-form Gaussian transport maps, a log-domain Sinkhorn solver with
everywhere-defined potentials/maps/Hessians, gap metrics on compact sets and
in L2(mu), and eps-sweep machinery for empirical rate verification.
"""

from .psd import (
    DimensionMismatch,
    NotPSD,
    SymMatrix,
    as_sym_matrix,
    loewner_leq,
    op_norm,
    sym_sqrt,
)
from .measures import (
    AssumptionParams,
    DiscreteMeasure,
    GaussianSpec,
    GridParams,
    GridTooLarge,
    NonuniformGrid,
    assumption_params,
    differential_entropy_discrete,
    discretize_gaussian,
    measure_from_json,
    measure_to_json,
)
from .gaussian import (
    LinearMap,
    brenier_map_matrix,
    entropic_map_matrix,
    prop11_bound,
    sup_gap_on_ball,
)
from .sinkhorn import (
    ConditionalWeights,
    DualPotentials,
    IndexOutOfRange,
    MaxIterExceeded,
    conditional_weights,
    entropic_hessian_eval,
    entropic_map_eval,
    normalize_potentials,
    phi_eps_eval,
    plan_density,
    plan_marginals,
    potentials_from_json,
    potentials_to_json,
    primal_value,
    schrodinger_residual,
    sinkhorn_solve,
)
from .metrics import (
    CompactBallSpec,
    EmptyGrid,
    caffarelli_bound,
    chewi_pooladian_bound,
    l2_mu_gap,
    sup_gap_bracket,
    sup_gap_on_grid,
)
from .ratelab import (
    CSV_HEADER,
    DegenerateData,
    RateFit,
    SweepRecord,
    expansion_check,
    fit_loglog_slope,
    gaussian_c0,
    run_gaussian_sweep,
    run_sinkhorn_sweep,
    verify_envelope,
    write_records_csv,
)

__version__ = "0.1.0"
