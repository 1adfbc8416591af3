"""Globally variance-optimal discrete-time hedging.

Backward-induction solvers for regime-switching random walks and GARCH-type
models, an exact brute-force tree oracle, delta-hedging baselines, and Monte
Carlo hedging-error evaluation.
"""

from .core import (
    DiscountCurve,
    DiscreteStep,
    HedgeRun,
    MartingaleDiagnostics,
    StepCoefficients,
    accrue_portfolio,
    diagnostics_along_path,
    hedge_ratio,
    initial_capital,
    step_backward_discrete,
)
from .exceptions import (
    ConfigError,
    DegenerateModelError,
    InvalidArgumentError,
    InvalidStateError,
    QHedgeError,
    StaleTablesError,
    WeightBoundsError,
)
from .models import (
    DiscreteIncrementLaw,
    GammaDifferenceLogReturnLaw,
    GarchModel,
    GaussianLogReturnLaw,
    NgarchParams,
    NormalIncrementLaw,
    RegimeSwitchingModel,
    SimulatedPath,
    emm_counterpart,
    garch_step_coeffs,
    garch_value_alpha,
    make_bs_model,
    make_ngarch_model,
    make_vg_model,
    ngarch_transition,
    rs_Ab,
    rs_rho_gamma_step,
    rs_value_alpha,
    sample_path,
    sample_paths_garch,
    sample_paths_rs,
)
from .numerics import (
    Grid1D,
    QuadratureDraws,
    SpdMatrix,
    bilinear_interp,
    linear_interp,
    rank_one_inverse,
)
from .oracle import (
    ExactSolution,
    MarketTree,
    OracleReport,
    TreeNode,
    brute_force_solve,
    build_tree_from_rs,
    recursion_vs_oracle,
    tree_backward,
)
from .simulator import (
    ComparisonResult,
    DuanDeltaTables,
    ErrorStats,
    STRATEGY_KINDS,
    bs_delta,
    bs_price,
    compare_strategies,
    density_data,
    duan_delta_tables,
    error_statistics,
    optimality_moments,
    run_hedge,
)
from .solver import (
    CallPayoff,
    PolicyTables,
    PutPayoff,
    SolverSpec,
    load_tables,
    policy_lookup,
    save_tables,
    solve_garch,
    solve_rs,
)

__version__ = "0.1.0"
