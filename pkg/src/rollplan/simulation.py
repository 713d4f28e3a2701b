"""Discrete-event shop floor with a rolling planning loop.

Each period: realize and update demand forecasts, snapshot inventory and
remaining capacity, call the planner, release first-period quantities as
production orders, run the event-driven floor to the period boundary, then
deliver against due demand and record costs.

Machines pull the earliest-planned-due order whose components are on hand
(earliest due date with skip over blocked orders); components are consumed
atomically when processing starts and finished quantities post to stock at
the actual completion minute. Setup times are drawn log-normal around the
nominal duration; a zero coefficient of variation reproduces the nominal
exactly.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .demand import (
    CustomerBehavior,
    DemandSource,
    ForecastMatrix,
    MmfeDemandSource,
    seed_initial_orders,
    update_period,
)
from .planning import PlanOutcome, PlanningSnapshot
from .scenarios import DeviationTracker, SigmaTable, estimate_sigma, parametric_sigma, sample_scenarios
from .system import ItemKind, ProductionSystem
from .rng import STREAM_DEMAND, STREAM_SCENARIO, STREAM_SETUP, demand_key, stream_rng

QTY_EPS = 1e-9


@dataclass
class KpiRates:
    finished_goods: float = 2.0
    wip_end: float = 1.0
    component_stock: float = 1.0
    wip_component: float = 0.5
    tardiness: float = 38.0


@dataclass
class ProductionOrder:
    order_id: int
    item_id: str
    qty: float
    release_period: int
    planned_end: int
    start_minute: float | None = None
    end_minute: float | None = None
    done: bool = False


class Planner(Protocol):
    name: str
    needs_scenarios: bool
    n_scenarios: int

    def plan(self, system: ProductionSystem, snapshot: PlanningSnapshot) -> PlanOutcome: ...


@dataclass
class _Machine:
    resource_id: str
    queue: list[ProductionOrder] = field(default_factory=list)
    current: ProductionOrder | None = None
    busy_until: float = 0.0


class ShopFloor:
    """Event-driven machines, stock, and open production orders."""

    def __init__(self, system: ProductionSystem, rng_setup: np.random.Generator, n_periods: int):
        self.system = system
        self.rng_setup = rng_setup
        self.n_periods = n_periods
        self.stock: dict[str, float] = {}
        for item in system.items.values():
            if item.kind is ItemKind.RAW:
                self.stock[item.item_id] = math.inf
            else:
                self.stock[item.item_id] = float(system.initial_stock.get(item.item_id, 0.0))
        self.machines = {rid: _Machine(rid) for rid in sorted(system.resources)}
        self.events: list[tuple[float, int, str]] = []
        self.open_orders: list[ProductionOrder] = []
        self.busy_minutes = {rid: np.zeros(n_periods + 1) for rid in sorted(system.resources)}
        self._seq = 0
        self._next_order_id = 1

    def release(self, item_id: str, qty: float, period: int, planned_end: int) -> ProductionOrder:
        order = ProductionOrder(self._next_order_id, item_id, qty, period, planned_end)
        self._next_order_id += 1
        step = self.system.routing[item_id]
        self.machines[step.resource_id].queue.append(order)
        self.open_orders.append(order)
        return order

    def _components_available(self, order: ProductionOrder) -> bool:
        for comp_id, per_unit in self.system.bom.components_of(order.item_id):
            if self.stock[comp_id] < per_unit * order.qty - QTY_EPS:
                return False
        return True

    def _consume_components(self, order: ProductionOrder) -> None:
        for comp_id, per_unit in self.system.bom.components_of(order.item_id):
            self.stock[comp_id] -= per_unit * order.qty

    def _draw_setup(self, item_id: str) -> float:
        step = self.system.routing[item_id]
        nominal = step.setup_time
        cov = self.system.resources[step.resource_id].setup_cov
        if nominal <= 0 or cov <= 0:
            return nominal
        sigma2 = math.log(1.0 + cov * cov)
        mu = math.log(nominal) - 0.5 * sigma2
        return float(self.rng_setup.lognormal(mean=mu, sigma=math.sqrt(sigma2)))

    def _attribute_busy(self, resource_id: str, start: float, end: float) -> None:
        pm = self.system.period_minutes
        minutes = self.busy_minutes[resource_id]
        p = int(start // pm)
        while p * pm < end and p < minutes.size:
            lo = max(start, p * pm)
            hi = min(end, (p + 1) * pm)
            if hi > lo:
                minutes[p] += hi - lo
            p += 1

    def _try_dispatch(self, machine: _Machine, now: float) -> bool:
        if machine.current is not None or not machine.queue:
            return False
        ranked = sorted(machine.queue, key=lambda o: (o.planned_end, o.release_period, o.order_id))
        picked = None
        for order in ranked:
            if self._components_available(order):
                picked = order
                break
        if picked is None:
            return False
        machine.queue.remove(picked)
        self._consume_components(picked)
        step = self.system.routing[picked.item_id]
        duration = self._draw_setup(picked.item_id) + picked.qty * step.processing_time
        picked.start_minute = now
        picked.end_minute = now + duration
        machine.current = picked
        machine.busy_until = now + duration
        self._attribute_busy(machine.resource_id, now, now + duration)
        self._seq += 1
        heapq.heappush(self.events, (now + duration, self._seq, machine.resource_id))
        return True

    def _dispatch_idle(self, now: float) -> None:
        progress = True
        while progress:
            progress = False
            for rid in sorted(self.machines):
                if self._try_dispatch(self.machines[rid], now):
                    progress = True

    def run_until(self, minute: float) -> None:
        self._dispatch_idle(max(0.0, minute - self.system.period_minutes))
        while self.events and self.events[0][0] <= minute + 1e-9:
            time, _, rid = heapq.heappop(self.events)
            machine = self.machines[rid]
            order = machine.current
            if order is None:
                continue
            order.done = True
            self.stock[order.item_id] += order.qty
            machine.current = None
            self._dispatch_idle(time)
        self.open_orders = [o for o in self.open_orders if not o.done]

    def utilization(self, first_period: int, last_period: int) -> dict[str, float]:
        """Busy fraction over 1-based periods first..last inclusive."""
        pm = self.system.period_minutes
        out = {}
        for rid in sorted(self.busy_minutes):
            window = self.busy_minutes[rid][first_period - 1 : last_period]
            out[rid] = float(window.sum() / (pm * max(1, window.size)))
        return out


def build_snapshot(
    system: ProductionSystem,
    floor: ShopFloor,
    matrix: ForecastMatrix,
    backlog_units: dict[str, float],
    period: int,
) -> PlanningSnapshot:
    """Freeze stock, scheduled arrivals, and free capacity for the planner.

    Window period m maps to simulation period (current + m - 1). Open orders
    land in the window period of their planned completion, clamped to the
    window; overdue orders count as arriving in the first period. Capacity
    already claimed by waiting or running work is removed from the first
    window period, spilling forward when it exceeds one bucket.
    """
    horizon = system.horizon
    pm = system.period_minutes
    now = (period - 1) * pm
    on_hand = {i: floor.stock[i] for i in sorted(system.producible_items())}
    arrivals = {i: np.zeros(horizon) for i in on_hand}
    reserved = {rid: 0.0 for rid in system.resources}
    for order in floor.open_orders:
        slot = min(max(order.planned_end - period, 0), horizon - 1)
        arrivals[order.item_id][slot] += order.qty
        step = system.routing[order.item_id]
        machine = floor.machines[step.resource_id]
        if machine.current is order:
            reserved[step.resource_id] += max(0.0, order.end_minute - now)
        else:
            reserved[step.resource_id] += step.setup_time + order.qty * step.processing_time
    capacity = {}
    for rid in sorted(system.resources):
        cap = np.full(horizon, system.resources[rid].capacity)
        spill = reserved[rid]
        for t in range(horizon):
            used = min(cap[t], spill)
            cap[t] -= used
            spill -= used
            if spill <= 0:
                break
        capacity[rid] = cap
    point = {}
    for item_id in sorted(system.items):
        if system.items[item_id].kind is not ItemKind.END:
            continue
        window = np.zeros(horizon)
        for m in range(1, horizon + 1):
            window[m - 1] = matrix.latest(item_id, period + m - 1)
        window[0] += backlog_units.get(item_id, 0.0)
        point[item_id] = window
    return PlanningSnapshot(
        period=period,
        horizon=horizon,
        on_hand=on_hand,
        arrivals=arrivals,
        capacity=capacity,
        point_demand=point,
    )


@dataclass
class ReplicationResult:
    n_periods: int
    warmup: int
    fgi: np.ndarray
    wip_end: np.ndarray
    inv_comp: np.ndarray
    wip_comp: np.ndarray
    tardy: np.ndarray
    cost: np.ndarray
    service_level: float
    mean_cost: float
    utilization: dict[str, float]
    releases: list[tuple[int, str, float]]
    objectives: list[float | None]
    solver_calls: int
    solver_wall_s: float
    solver_max_wall_s: float
    solver_nodes: int
    solver_limit_hits: int
    sigma_table: SigmaTable | None
    matrix: ForecastMatrix

    def trace_rows(self) -> list[list]:
        rows = [["period", "fgi", "wip_end", "inv_comp", "wip_comp", "tardy", "cost"]]
        for t in range(self.n_periods):
            rows.append(
                [
                    t + 1,
                    repr(float(self.fgi[t])),
                    repr(float(self.wip_end[t])),
                    repr(float(self.inv_comp[t])),
                    repr(float(self.wip_comp[t])),
                    repr(float(self.tardy[t])),
                    repr(float(self.cost[t])),
                ]
            )
        return rows


class Simulation:
    def __init__(
        self,
        system: ProductionSystem,
        behavior: CustomerBehavior,
        planner: Planner,
        n_periods: int,
        warmup: int,
        base_seed: int,
        replication: int,
        rates: KpiRates | None = None,
        demand_source: DemandSource | None = None,
        on_plan=None,
    ):
        if warmup < 0 or warmup >= n_periods:
            raise ValueError("warmup must sit inside the run length")
        if system.horizon != behavior.horizon:
            raise ValueError("system and customer horizons differ")
        self.system = system
        self.behavior = behavior
        self.planner = planner
        self.n_periods = n_periods
        self.warmup = warmup
        self.rates = rates or KpiRates()
        self.on_plan = on_plan
        key = demand_key(system.system_id, behavior.kind, behavior.alpha)
        self.rng_demand = stream_rng(base_seed, key, replication, STREAM_DEMAND)
        self.rng_setup = stream_rng(base_seed, key, replication, STREAM_SETUP)
        self.rng_scenario = stream_rng(base_seed, key, replication, STREAM_SCENARIO)
        self.source = demand_source or MmfeDemandSource(behavior, self.rng_demand)
        means = {i.item_id: i.mean_demand for i in system.items.values() if i.kind is ItemKind.END}
        self.matrix = ForecastMatrix(horizon=system.horizon, means=means)
        self.tracker = DeviationTracker(horizon=system.horizon)
        self._fallback_sigma = parametric_sigma(behavior, means)
        self._frozen_sigma: SigmaTable | None = None

    def _sigma_table(self, period: int) -> SigmaTable:
        if period <= self.warmup:
            return self._fallback_sigma
        if self._frozen_sigma is None:
            self._frozen_sigma = estimate_sigma(self.tracker, fallback=self._fallback_sigma)
        return self._frozen_sigma

    def run(self) -> ReplicationResult:
        system = self.system
        n = self.n_periods
        floor = ShopFloor(system, self.rng_setup, n)
        end_items = system.end_items()
        comp_items = system.component_items()
        backlog: dict[str, deque] = {i: deque() for i in end_items}
        backlog_units = {i: 0.0 for i in end_items}
        fgi = np.zeros(n)
        wip_end = np.zeros(n)
        inv_comp = np.zeros(n)
        wip_comp = np.zeros(n)
        tardy = np.zeros(n)
        cost = np.zeros(n)
        releases: list[tuple[int, str, float]] = []
        objectives: list[float | None] = []
        solver_calls = 0
        solver_wall = 0.0
        solver_max_wall = 0.0
        solver_nodes = 0
        limit_hits = 0
        demand_units = 0.0
        ontime_units = 0.0
        seed_initial_orders(self.matrix, end_items, self.source)
        for t in range(1, n + 1):
            update_period(self.matrix, end_items, t, self.source)
            for item_id in end_items:
                if self.matrix.has_order(item_id, t):
                    self.tracker.record(self.matrix.order(item_id, t))
            snapshot = build_snapshot(system, floor, self.matrix, backlog_units, t)
            if self.planner.needs_scenarios:
                snapshot.scenarios = sample_scenarios(
                    snapshot.point_demand,
                    self._sigma_table(t),
                    self.planner.n_scenarios,
                    self.rng_scenario,
                )
            outcome = self.planner.plan(system, snapshot)
            if self.on_plan is not None:
                self.on_plan(t, snapshot, outcome)
            objectives.append(outcome.objective)
            if outcome.objective is not None:
                solver_calls += 1
                solver_wall += outcome.wall_time_s
                solver_max_wall = max(solver_max_wall, outcome.wall_time_s)
                solver_nodes += outcome.nodes
                limit_hits += 1 if outcome.limit_hit else 0
            for row in outcome.plan.releases():
                lead = system.items[row.item_id].lead_time
                floor.release(row.item_id, row.qty, t, t + lead)
                releases.append((t, row.item_id, row.qty))
            floor.run_until(t * system.period_minutes)
            idx = t - 1
            for item_id in end_items:
                queue = backlog[item_id]
                while queue and floor.stock[item_id] > QTY_EPS:
                    entry = queue[0]
                    served = min(entry[1], floor.stock[item_id])
                    entry[1] -= served
                    floor.stock[item_id] -= served
                    if entry[1] <= QTY_EPS:
                        queue.popleft()
                due = self.matrix.final(item_id, t)
                served = min(due, floor.stock[item_id])
                floor.stock[item_id] -= served
                if t > self.warmup:
                    demand_units += due
                    ontime_units += served
                short = due - served
                if short > QTY_EPS:
                    queue.append([t, short])
                backlog_units[item_id] = sum(e[1] for e in queue)
                tardy[idx] += backlog_units[item_id]
            fgi[idx] = sum(floor.stock[i] for i in end_items)
            inv_comp[idx] = sum(floor.stock[i] for i in comp_items)
            for order in floor.open_orders:
                if system.items[order.item_id].kind is ItemKind.END:
                    wip_end[idx] += order.qty
                else:
                    wip_comp[idx] += order.qty
            cost[idx] = (
                self.rates.finished_goods * fgi[idx]
                + self.rates.wip_end * wip_end[idx]
                + self.rates.component_stock * inv_comp[idx]
                + self.rates.wip_component * wip_comp[idx]
                + self.rates.tardiness * tardy[idx]
            )
        service = 1.0 if demand_units <= 0 else ontime_units / demand_units
        return ReplicationResult(
            n_periods=n,
            warmup=self.warmup,
            fgi=fgi,
            wip_end=wip_end,
            inv_comp=inv_comp,
            wip_comp=wip_comp,
            tardy=tardy,
            cost=cost,
            service_level=service,
            mean_cost=float(cost[self.warmup :].mean()),
            utilization=floor.utilization(self.warmup + 1, n),
            releases=releases,
            objectives=objectives,
            solver_calls=solver_calls,
            solver_wall_s=solver_wall,
            solver_max_wall_s=solver_max_wall,
            solver_nodes=solver_nodes,
            solver_limit_hits=limit_hits,
            sigma_table=self._frozen_sigma,
            matrix=self.matrix,
        )
