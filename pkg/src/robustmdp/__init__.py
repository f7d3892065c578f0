"""Robust MDP value iteration for L_p-ball uncertainty sets.

Closed-form or bisection-based robust Bellman operators for sa- and
s-rectangular uncertainty, value iteration drivers, threshold policy
extraction, brute-force oracles and a relative-cost benchmark.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DimensionMismatch,
    DimensionTooLarge,
    DiscountOutOfRange,
    InvalidConfig,
    NonStochasticRow,
    RectangularityMismatch,
    RobustMDPError,
    ValidationError,
)
from .mdp import (  # noqa: E402
    MdpInstance,
    NormIndex,
    Rect,
    UncertaintySpec,
    holder_conjugate,
    load_instance,
    q_from_value,
    random_instance,
    save_instance,
    validate_mdp,
    validate_uncertainty,
)
from .pvariance import PMeanResult, p_mean, p_variance, p_variance_masked  # noqa: E402
from .waterfill import WaterFillResult, active_count, water_fill, water_fill_rows  # noqa: E402
from .bellman import (  # noqa: E402
    BellmanContext,
    bellman_opt,
    bellman_opt_nonrobust,
    bellman_optimistic_s,
    bellman_optimistic_sa,
    bellman_policy,
    bellman_s_opt,
    bellman_s_policy,
    bellman_sa_opt,
    bellman_sa_policy,
    make_context,
)
from .solver import (  # noqa: E402
    SolveConfig,
    SolveReport,
    evaluate_policy,
    extract_policy,
    q_value_iteration_sa,
    value_iteration,
)
