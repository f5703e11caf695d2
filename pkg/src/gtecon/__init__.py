"""Multi-stage Dorfman group testing with an income-based economic cost model."""

from .core import (
    PlanError,
    PoolPlan,
    Population,
    SimulationOutcome,
    draw_population,
    expected_tests,
    mean_tests,
    simulate,
)
from .econ import BASELINE, CostBreakdown, CostParams, eci, economic_cost, range_per_individual
from .harness import ScenarioConfig, ScenarioResult, optimal_choice, run_scenario, sweep
from .ingest import (
    EmpiricalIncomeDistribution,
    daily_income,
    load_incidence_csv,
    load_income_csv,
    prevalence_from_incidence,
    synthesize_incomes,
)
from .optimize import OptimizationRequest, OptimizationResult, exhaustive_search, optimize_pool_sizes

__version__ = "0.1.0"

__all__ = [
    "BASELINE",
    "CostBreakdown",
    "CostParams",
    "EmpiricalIncomeDistribution",
    "OptimizationRequest",
    "OptimizationResult",
    "PlanError",
    "PoolPlan",
    "Population",
    "ScenarioConfig",
    "ScenarioResult",
    "SimulationOutcome",
    "daily_income",
    "draw_population",
    "eci",
    "economic_cost",
    "exhaustive_search",
    "expected_tests",
    "load_incidence_csv",
    "load_income_csv",
    "mean_tests",
    "optimal_choice",
    "optimize_pool_sizes",
    "prevalence_from_incidence",
    "range_per_individual",
    "run_scenario",
    "simulate",
    "sweep",
    "synthesize_incomes",
]
