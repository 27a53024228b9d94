"""Risk-aware production and futures trading in coupled ammonia spot/futures markets."""

from .bargaining import (
    BargainConfig,
    BargainOutcome,
    BargainStatus,
    bargain,
    nash_gradients,
    nash_objective,
    verify_agreement,
)
from .equilibrium import (
    EquilibriumOutcome,
    IterationConfig,
    NonConvergenceError,
    best_response_residual,
    solve_spot_equilibrium,
)
from .experiments import (
    StudyKind,
    StudySpec,
    UtilityDistribution,
    run_base,
    run_nptp,
    run_sweep,
    utility_distribution,
)
from .lp import LinearProgram, LpSolution, LpStatus, SolverFailure, solve_lp
from .market import (
    CashflowBreakdown,
    FuturesContract,
    FuturesMode,
    InfeasibleDeliveryError,
    MarketParams,
    ProducerKind,
    ProducerSpec,
    default_ga_spec,
    default_rep2a_spec,
    nptp_spec,
    profit_ga,
    profit_rep2a,
    settle_futures,
    settlement_matrix,
    spot_price,
)
from .programs import (
    Anticipation,
    AnticipationKind,
    ContractParam,
    PriceField,
    ProducerProgram,
    build_ga_program,
    build_rep2a_program,
    contract_sensitivities,
    optimal_value_sensitivity,
)
from .risk import CvarResult, cvar, var
from .scenarios import (
    ScenarioConfig,
    ScenarioSet,
    WindProfile,
    default_wind_profile,
    energy_available,
    generate_scenarios,
    moving_average,
)

__version__ = "0.1.0"
