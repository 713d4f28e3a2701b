import numpy as np
import pytest

from rollplan.configio import load_system, resolve_system_path
from rollplan.planning import PlanningSnapshot
from rollplan.system import Bom, Item, ItemKind, ProductionSystem, Resource, RouteStep


@pytest.fixture(scope="session")
def elementary():
    return load_system(resolve_system_path("elementary"))


@pytest.fixture(scope="session")
def medium():
    return load_system(resolve_system_path("medium"))


def make_single_item_system(
    horizon: int = 12,
    capacity: float = 1440.0,
    setup_time: float = 144.0,
    processing_time: float = 1.8,
    lead_time: int = 1,
    mean_demand: float = 200.0,
    setup_cost: float = 0.0,
    holding_cost: float = 2.0,
    backlog_cost: float = 38.0,
    lost_sales_cost: float = 100.0,
) -> ProductionSystem:
    """One end item fed by unlimited raw material on one machine."""
    items = {
        "p": Item(
            "p",
            ItemKind.END,
            lead_time=lead_time,
            mean_demand=mean_demand,
            holding_cost=holding_cost,
            backlog_cost=backlog_cost,
            lost_sales_cost=lost_sales_cost,
        ),
        "r": Item("r", ItemKind.RAW),
    }
    bom = Bom({("r", "p"): 1.0})
    resources = {"m": Resource("m", capacity)}
    routing = {"p": RouteStep("m", setup_time, processing_time, setup_cost=setup_cost)}
    return ProductionSystem(
        system_id="single",
        items=items,
        bom=bom,
        resources=resources,
        routing=routing,
        horizon=horizon,
    )


def brute_force_objective(problem) -> float:
    """Exhaustive enumeration over all binary patterns, one LP each."""
    from itertools import product

    from rollplan.milp import LpStatus, solve_lp

    bin_idx = np.flatnonzero(problem.binary)
    best = np.inf
    for pattern in product((0.0, 1.0), repeat=bin_idx.size):
        lb = problem.lb.copy()
        ub = problem.ub.copy()
        lb[bin_idx] = pattern
        ub[bin_idx] = pattern
        res = solve_lp(problem, lb, ub)
        if res.status is LpStatus.OPTIMAL and res.objective < best:
            best = res.objective
    return best


def make_snapshot(
    system: ProductionSystem,
    demand: dict[str, np.ndarray],
    on_hand: dict[str, float] | None = None,
    period: int = 1,
) -> PlanningSnapshot:
    horizon = system.horizon
    return PlanningSnapshot(
        period=period,
        horizon=horizon,
        on_hand=dict(on_hand or {}),
        arrivals={i: np.zeros(horizon) for i in system.producible_items()},
        capacity={
            k: np.full(horizon, r.capacity, dtype=float) for k, r in system.resources.items()
        },
        point_demand={i: np.asarray(d, dtype=float) for i, d in demand.items()},
    )
