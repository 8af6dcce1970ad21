"""Ordered-entry loss system with finite total service capacity.

Analytic blocking/delay metrics through the overflow-transform recursion,
stability and finite-delay diagnostics, the constant-blocking tail optimum,
a finite-horizon rate optimizer, and a discrete-event simulation oracle.
"""

from .arrivals import GammaArrivals
from .chain import Allocation, OverflowChain, lst_sweep
from .errors import (
    CapacityError,
    ConfigError,
    InsufficientDataError,
    LevelError,
    NoRootError,
    NumericDegeneracyError,
    OptimizerError,
    OrderedCapacityError,
)
from .geometric import (
    alpha_crossing,
    ell_alpha_curve,
    geometric_allocation,
    tap_objective_value,
    tap_solution,
)
from .metrics import (
    SystemMetrics,
    blocking_probabilities,
    compute_metrics,
    effective_utilization,
    ell_series,
    erlang_b,
    expected_delay,
    fastest_idle_distribution,
    residual_tail,
)
from .optimizer import (
    OptimizationResult,
    OptimizerConfig,
    objective_value,
    optimize_allocation,
    sqrt_rho_heuristic,
    tail_pinned_rate,
)
from .simulate import OverflowStats, SimConfig, SimResult, merge_results, overflow_times, simulate
from .stability import (
    FiniteDelayReport,
    StabilityReport,
    feasible_construction,
    finite_delay_diagnostics,
    is_feasible,
    max_first_rate,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "CapacityError",
    "ConfigError",
    "FiniteDelayReport",
    "GammaArrivals",
    "InsufficientDataError",
    "LevelError",
    "NoRootError",
    "NumericDegeneracyError",
    "OptimizationResult",
    "OptimizerConfig",
    "OptimizerError",
    "OrderedCapacityError",
    "OverflowChain",
    "OverflowStats",
    "SimConfig",
    "SimResult",
    "StabilityReport",
    "SystemMetrics",
    "alpha_crossing",
    "blocking_probabilities",
    "compute_metrics",
    "effective_utilization",
    "ell_alpha_curve",
    "ell_series",
    "erlang_b",
    "expected_delay",
    "fastest_idle_distribution",
    "feasible_construction",
    "finite_delay_diagnostics",
    "geometric_allocation",
    "is_feasible",
    "lst_sweep",
    "max_first_rate",
    "merge_results",
    "objective_value",
    "optimize_allocation",
    "overflow_times",
    "residual_tail",
    "simulate",
    "sqrt_rho_heuristic",
    "tail_pinned_rate",
    "tap_objective_value",
    "tap_solution",
]
