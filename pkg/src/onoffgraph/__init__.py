"""Simulation and moment-based inference for dynamic on/off random graphs.

Every edge of a complete graph switches between present and absent according
to an independent alternating renewal process; the package simulates the
stationary aggregate edge / triangle / wedge count processes, computes their
exact joint laws and covariances, and estimates the on/off duration
parameters from observed counts.
"""

from .asymp import (
    DivergenceWarning,
    MomentCov,
    ParamCov,
    delta_method_cov,
    finiteness_check,
    general_moment_cov,
    geometric_moment_cov,
    mixed_moment,
)
from .errors import (
    ConvergenceError,
    DegenerateSaddleError,
    IncompatibleMomentsError,
    InfiniteMeanError,
    OutOfRangeError,
    ParameterError,
)
from .harness import (
    CampaignSummary,
    ExperimentConfig,
    emit_outputs,
    mix_seed,
    run_campaign,
)
from .laws import (
    Geometric,
    Pareto,
    Weibull,
    chi_like,
    hurwitz_like,
    invert_chi_like,
    invert_hurwitz_like,
    invert_zeta_like,
    law_from_config,
    sample_duration,
    zeta_like,
)
from .moments import (
    EstimateReport,
    MomentSet,
    empirical_moments,
    estimate_from_subgraph,
    estimate_gg,
    estimate_pareto_geo,
    estimate_parpar,
    estimate_weibull_geo,
    theoretical_moment_set,
    theoretical_moments,
    triangle_moments,
    wedge_moments,
)
from .renewal import (
    AutocovTable,
    autocovariance,
    joint_distribution,
    joint_mgf,
    legendre_transform,
    prob_all_on,
    saddlepoint_logprob,
)
from .simulate import (
    CountTrace,
    ModelSpec,
    load_trace,
    save_trace,
    simulate_edge_trace,
    simulate_trace,
    stationary_init,
)

__version__ = "1.0.0"
