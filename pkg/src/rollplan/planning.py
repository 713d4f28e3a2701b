"""Shared planning data structures.

Window convention: model period m in 1..T maps to simulation period
t_bar + m - 1, so model period 1 is the current period and its demand is the
realized amount (plus any open backlog). Arrays are 0-indexed by m - 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PlanRow:
    item_id: str
    period: int  # model period, 1-based
    qty: float
    setup: bool
    release_now: bool


@dataclass
class ProductionPlan:
    period: int  # simulation period the plan was made for
    rows: list[PlanRow] = field(default_factory=list)

    def releases(self) -> list[PlanRow]:
        return [r for r in self.rows if r.release_now and r.qty > 0]

    def row_for(self, item_id: str, period: int) -> PlanRow | None:
        for r in self.rows:
            if r.item_id == item_id and r.period == period:
                return r
        return None


@dataclass
class DemandScenarios:
    """Scenario demand per end item: arrays of shape (n_scenarios, horizon)."""

    values: dict[str, np.ndarray]
    probabilities: np.ndarray

    @property
    def n(self) -> int:
        return len(self.probabilities)


@dataclass
class PlanningSnapshot:
    period: int
    horizon: int
    on_hand: dict[str, float]
    arrivals: dict[str, np.ndarray]  # planned receipts by model period, shape (T,)
    capacity: dict[str, np.ndarray]  # free minutes by model period, shape (T,)
    point_demand: dict[str, np.ndarray] = field(default_factory=dict)
    scenarios: DemandScenarios | None = None


@dataclass
class PlanOutcome:
    plan: ProductionPlan
    objective: float | None = None
    wall_time_s: float = 0.0
    nodes: int = 0
    status: str = "ok"
    limit_hit: bool = False
    extras: dict = field(default_factory=dict)
