"""Planner adapters: one call signature over MRP and the two optimizers.

Safety stock targets are resolved once per planner from the multiplier and
the system's exploded mean requirements, so every approach plans against the
same absolute buffer levels.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .lotsizing import build_deterministic, build_stochastic, extract_plan
from .milp import MipStatus, SolverLimits, solve_mip
from .mrp import MrpParams, run_mrp, tableau_csv_rows
from .planning import PlanOutcome, PlanningSnapshot
from .system import ProductionSystem

PLANNER_KINDS = ("mrp", "det", "stoch")


class PlannerError(RuntimeError):
    pass


def resolve_safety_stocks(system: ProductionSystem, ss_mult: float) -> dict[str, float]:
    req = system.mean_requirements()
    return {i: ss_mult * req[i] for i in system.producible_items()}


@dataclass
class MrpPlanner:
    params: MrpParams
    safety_stocks: dict[str, float] | None = None
    keep_tableaus: bool = False
    name: str = "mrp"
    needs_scenarios: bool = field(default=False, init=False)
    n_scenarios: int = field(default=0, init=False)

    def plan(self, system: ProductionSystem, snapshot: PlanningSnapshot) -> PlanOutcome:
        started = time.perf_counter()
        plan, tableaus = run_mrp(system, snapshot, self.params, safety_stocks=self.safety_stocks)
        outcome = PlanOutcome(plan=plan, objective=None, wall_time_s=time.perf_counter() - started)
        if self.keep_tableaus:
            outcome.extras["tableau_rows"] = tableau_csv_rows(tableaus)
        return outcome


@dataclass
class OptimizingPlanner:
    """Deterministic (single path, full commitment) or scenario-based planner.

    Consecutive solves are warm-started from the previous period's setup
    pattern shifted one period forward. Only the first period of each plan is
    executed, so yesterday's decisions for tomorrow are usually still feasible
    and near-optimal today; seeding them keeps the rolling plan from flapping
    between near-tied solutions and gives the solver an early cutoff.
    """

    kind: str
    ss_mult: float = 0.0
    t_tilde: int = 12
    n_scenarios: int = 0
    limits: SolverLimits = field(default_factory=SolverLimits)
    keep_instances: bool = False
    _last_setup: dict[tuple[str, int], float] | None = field(
        default=None, init=False, repr=False
    )

    def __post_init__(self):
        if self.kind not in ("det", "stoch"):
            raise ValueError(f"unknown optimizing planner kind {self.kind!r}")
        if self.kind == "stoch" and self.n_scenarios < 1:
            raise ValueError("scenario planner needs n_scenarios >= 1")
        self.name = self.kind

    @property
    def needs_scenarios(self) -> bool:
        return self.kind == "stoch"

    def plan(self, system: ProductionSystem, snapshot: PlanningSnapshot) -> PlanOutcome:
        safety = resolve_safety_stocks(system, self.ss_mult)
        if self.kind == "det":
            instance = build_deterministic(system, snapshot, safety_stocks=safety)
        else:
            instance = build_stochastic(system, snapshot, self.t_tilde, safety_stocks=safety)
        warm = None
        if self._last_setup is not None:
            warm = np.ones_like(instance.problem.lb)
            for (item, t), col in instance.y_idx.items():
                warm[col] = self._last_setup.get((item, t + 1), 1.0)
        result = solve_mip(instance.problem, self.limits, warm_binary=warm)
        if result.x is None or result.status not in (MipStatus.OPTIMAL, MipStatus.FEASIBLE):
            raise PlannerError(
                f"{self.name} solve failed in period {snapshot.period}: {result.status.name}"
            )
        self._last_setup = {
            key: float(round(result.x[col])) for key, col in instance.y_idx.items()
        }
        outcome = PlanOutcome(
            plan=extract_plan(instance, result.x),
            objective=float(result.objective),
            wall_time_s=result.wall_time,
            nodes=result.nodes,
            status=result.status.name.lower(),
            limit_hit=result.limit_hit,
        )
        if self.keep_instances:
            outcome.extras["instance"] = instance
            outcome.extras["x"] = result.x
        return outcome


def make_planner(
    kind: str,
    system: ProductionSystem,
    lead_time: int = 1,
    ss_mult: float = 0.0,
    lot: str = "fop:1",
    n_scenarios: int = 30,
    t_tilde: int | None = None,
    limits: SolverLimits | None = None,
    keep_debug: bool = False,
):
    """Build a planner for a system whose lead times match ``lead_time``."""
    from .mrp import LotPolicy

    if kind == "mrp":
        params = MrpParams(lead_time=lead_time, ss_mult=ss_mult, lot=LotPolicy.parse(lot))
        return MrpPlanner(
            params=params,
            safety_stocks=resolve_safety_stocks(system, ss_mult),
            keep_tableaus=keep_debug,
        )
    if kind in ("det", "stoch"):
        return OptimizingPlanner(
            kind=kind,
            ss_mult=ss_mult,
            t_tilde=system.horizon if t_tilde is None else t_tilde,
            n_scenarios=n_scenarios if kind == "stoch" else 0,
            limits=limits or SolverLimits(),
            keep_instances=keep_debug,
        )
    raise ValueError(f"unknown planner kind {kind!r}")
