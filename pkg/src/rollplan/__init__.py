"""Rolling-horizon production planning testbed.

Simulates multi-item, multi-stage production under evolving demand
forecasts and compares MRP against deterministic and scenario-based
lot-sizing optimization inside the same rolling loop.
"""

from .configio import BUNDLED_SYSTEMS, ConfigError, load_system, resolve_system_path
from .demand import CustomerBehavior, ForecastMatrix, MmfeDemandSource
from .harness import ExperimentGrid, RunConfig, run_single, run_sweep
from .milp import SolverLimits, solve_lp, solve_mip
from .mrp import LotPolicy, MrpParams, run_mrp
from .planners import MrpPlanner, OptimizingPlanner, PlannerError, make_planner
from .simulation import KpiRates, Simulation
from .system import ProductionSystem, planned_shop_load, validate_system

__version__ = "0.1.0"

__all__ = [
    "BUNDLED_SYSTEMS",
    "ConfigError",
    "CustomerBehavior",
    "ExperimentGrid",
    "ForecastMatrix",
    "KpiRates",
    "LotPolicy",
    "MmfeDemandSource",
    "MrpParams",
    "MrpPlanner",
    "OptimizingPlanner",
    "PlannerError",
    "ProductionSystem",
    "RunConfig",
    "Simulation",
    "SolverLimits",
    "load_system",
    "make_planner",
    "planned_shop_load",
    "resolve_system_path",
    "run_mrp",
    "run_single",
    "run_sweep",
    "solve_lp",
    "solve_mip",
    "validate_system",
    "__version__",
]
