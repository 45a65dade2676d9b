"""Scenario-based optimal hedging under convex risk composed with utility."""

from .errors import (
    DimensionMismatch,
    HedgekitError,
    Infeasible,
    LevelOutOfRange,
    LpInfeasible,
    LpUnbounded,
    NoEmm,
    NonConvexMeasure,
    NonPositiveWeight,
    NotNonnegative,
    NotNormalized,
    NotProbability,
    ParseError,
    SingularCovariance,
    Unbounded,
)
from .scenario import Measure, Rv, ScenarioSpace, expectation, make_space, quantile
from .riskmeasures import (
    DualSet,
    RiskMeasureSpec,
    dual_set,
    entropic,
    expected_shortfall,
    neg_expectation,
    rho_eval,
    rho_penalty,
    rho_subgradient,
    value_at_risk,
)
from .preference import (
    ComposedPreference,
    UtilitySpec,
    affine,
    duality_gap,
    exponential,
    rho_u_eval,
    rho_u_penalty,
    rho_u_subgradient,
    shortfall,
    u_conjugate,
    u_eval,
    u_map,
    u_slope,
)
from .market import (
    ConstraintSet,
    Market,
    box,
    budget_hyperplane,
    feasibility_violation,
    hedged_position,
    long_only_simplex,
    normal_cone_residual,
    project,
    support_function,
    unconstrained,
)
from .hedge import (
    GaussianMarket,
    HedgeSolution,
    OptimalityCheck,
    SolverOptions,
    gaussian_es_exp_gradient,
    gaussian_es_exp_objective,
    problem_penalty,
    solve_gaussian_es_exp,
    solve_gaussian_meanvar,
    solve_numeric,
    verify_optimality,
)
from .pricing import (
    PriceReport,
    buyer_price,
    check_arbitrage,
    check_complete,
    emm_bounds,
    emm_witness,
    price_report,
    seller_price,
    subhedge_price,
    superhedge_price,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
