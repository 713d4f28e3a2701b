"""Capacitated lot-sizing instances over a planning snapshot.

One builder covers both planners: the deterministic model is the stochastic
one with a single scenario of probability 1 and every period first-stage.
Production quantities are shared across scenarios through period t_tilde
(non-anticipative by construction, single column); inventory, backlog and
the component safety-stock slack are always scenario-indexed.

Safety stock enters as an inventory lower bound for all window periods but
the last. End items satisfy it unconditionally via the backlog variable;
components carry a heavily penalized slack so every snapshot stays feasible
even when the bound is physically unreachable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .milp import LpBuilder, LpProblem
from .planning import PlanRow, PlanningSnapshot, ProductionPlan
from .system import ItemKind, ProductionSystem

SS_SLACK_PENALTY = 1e5
QTY_EPS = 1e-9


@dataclass
class MilpInstance:
    problem: LpProblem
    period: int
    horizon: int
    t_tilde: int
    items: list[str]
    end_items: list[str]
    probabilities: np.ndarray
    y_idx: dict[tuple[str, int], int]
    q_idx: dict[tuple[str, int, int | None], int]
    i_idx: dict[tuple[str, int, int], int]
    b_idx: dict[tuple[str, int, int], int]
    g_idx: dict[tuple[str, int, int], int] = field(default_factory=dict)
    capacity_rows: list[tuple[str, int, int | None, int]] = field(default_factory=list)
    big_m: dict[tuple[str, int], float] = field(default_factory=dict)

    @property
    def n_scenarios(self) -> int:
        return len(self.probabilities)

    def q_column(self, item_id: str, t: int, scenario: int) -> int:
        if t <= self.t_tilde:
            return self.q_idx[(item_id, t, None)]
        return self.q_idx[(item_id, t, scenario)]

    def q_value(self, x: np.ndarray, item_id: str, t: int, scenario: int = 0) -> float:
        return float(x[self.q_column(item_id, t, scenario)])


def dedupe_scenarios(
    values: dict[str, np.ndarray], probabilities: np.ndarray
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Merge bitwise-identical scenarios, summing probabilities.

    Exact model-preserving reduction; with zero spread it collapses the
    stochastic instance onto the deterministic one.
    """
    items = sorted(values)
    stacked = np.hstack([np.asarray(values[i], dtype=float) for i in items])
    _, first_pos, inverse = np.unique(stacked, axis=0, return_index=True, return_inverse=True)
    keep = np.sort(first_pos)
    order = {orig: rank for rank, orig in enumerate(keep)}
    merged_probs = np.zeros(keep.size)
    uniq_of = {uniq_row: order[first] for uniq_row, first in enumerate(first_pos)}
    for orig, uniq_row in enumerate(np.asarray(inverse).ravel()):
        merged_probs[uniq_of[uniq_row]] += probabilities[orig]
    merged_probs = merged_probs / merged_probs.sum()
    merged = {i: np.asarray(values[i], dtype=float)[keep].copy() for i in items}
    return merged, merged_probs


def build_instance(
    system: ProductionSystem,
    snapshot: PlanningSnapshot,
    demand: dict[str, np.ndarray],
    probabilities: np.ndarray,
    t_tilde: int,
    safety_stocks: dict[str, float] | None = None,
) -> MilpInstance:
    horizon = snapshot.horizon
    if not 1 <= t_tilde <= horizon:
        raise ValueError(f"t_tilde must be in 1..{horizon}, got {t_tilde}")
    probabilities = np.asarray(probabilities, dtype=float)
    if abs(probabilities.sum() - 1.0) > 1e-9:
        raise ValueError(f"scenario probabilities sum to {probabilities.sum()!r}, expected 1")
    if (probabilities < 0).any():
        raise ValueError("scenario probabilities must be nonnegative")
    n_sc = probabilities.size
    ss = dict(safety_stocks or {})

    items = system.producible_items()
    ends = [i for i in items if system.items[i].kind is ItemKind.END]
    comps = [i for i in items if system.items[i].kind is ItemKind.COMPONENT]
    for i in ends:
        d = np.asarray(demand.get(i))
        if d is None or d.shape != (n_sc, horizon):
            raise ValueError(f"demand for {i!r} must have shape ({n_sc}, {horizon})")

    lead = {i: system.items[i].lead_time for i in items}
    cum_arrivals = {
        i: np.cumsum(np.asarray(snapshot.arrivals.get(i, np.zeros(horizon)), dtype=float))
        for i in items
    }
    on_hand = {i: float(snapshot.on_hand.get(i, 0.0)) for i in items}
    cum_demand = {i: np.cumsum(np.asarray(demand[i], dtype=float), axis=1) for i in ends}
    max_window_demand = {i: float(cum_demand[i][:, -1].max()) for i in ends}

    # bound on cumulative production of item i over production periods >= s;
    # backlogging lets any in-window arrival serve any due date, so the end
    # item bound is the full window demand, and production arriving past the
    # window appears in no balance row and is fixed to zero
    cumprod_cache: dict[tuple[str, int], float] = {}

    def cumprod(item_id: str, s: int) -> float:
        s = max(s, 1)
        if s > horizon - lead[item_id]:
            return 0.0
        key = (item_id, s)
        if key not in cumprod_cache:
            if system.items[item_id].kind is ItemKind.END:
                total = max_window_demand[item_id] + ss.get(item_id, 0.0)
            else:
                total = ss.get(item_id, 0.0)
                for parent, qty in system.bom.parents_of(item_id):
                    if parent in lead:
                        total += qty * cumprod(parent, s + lead[item_id])
            cumprod_cache[key] = total
        return cumprod_cache[key]

    def big_m_for(item_id: str, t: int) -> float:
        step = system.routing[item_id]
        free = float(snapshot.capacity[step.resource_id][t - 1])
        cap_side = np.inf
        if step.processing_time > 0:
            cap_side = (free - step.setup_time) / step.processing_time
        demand_side = cumprod(item_id, t)
        return max(0.0, min(cap_side, demand_side))

    builder = LpBuilder()
    y_idx: dict[tuple[str, int], int] = {}
    q_idx: dict[tuple[str, int, int | None], int] = {}
    i_idx: dict[tuple[str, int, int], int] = {}
    b_idx: dict[tuple[str, int, int], int] = {}
    g_idx: dict[tuple[str, int, int], int] = {}
    big_m: dict[tuple[str, int], float] = {}

    # period-major so the solver's declaration-order branching decides the
    # imminent setups first; only period 1 of each rolling solve is executed
    for t in range(1, horizon + 1):
        for i in items:
            step = system.routing[i]
            y_idx[(i, t)] = builder.add_var(f"Y_{i}_{t}", obj=step.setup_cost, lb=0.0, ub=1.0, binary=True)
    for i in items:
        v = system.items[i].production_cost
        for t in range(1, horizon + 1):
            if t <= t_tilde:
                q_idx[(i, t, None)] = builder.add_var(f"Q_{i}_{t}", obj=v)
            else:
                for w in range(n_sc):
                    q_idx[(i, t, w)] = builder.add_var(f"Q_{i}_{t}_s{w}", obj=probabilities[w] * v)
    for i in items:
        h = system.items[i].holding_cost
        is_end = system.items[i].kind is ItemKind.END
        for t in range(1, horizon + 1):
            lb = ss.get(i, 0.0) if (is_end and t < horizon) else 0.0
            for w in range(n_sc):
                i_idx[(i, t, w)] = builder.add_var(f"I_{i}_{t}_s{w}", obj=probabilities[w] * h, lb=lb)
    for i in ends:
        item = system.items[i]
        for t in range(1, horizon + 1):
            rate = item.backlog_cost if t < horizon else item.lost_sales_cost
            for w in range(n_sc):
                b_idx[(i, t, w)] = builder.add_var(f"B_{i}_{t}_s{w}", obj=probabilities[w] * rate)
    for i in comps:
        if ss.get(i, 0.0) <= 0:
            continue
        for t in range(1, horizon):
            for w in range(n_sc):
                g_idx[(i, t, w)] = builder.add_var(f"G_{i}_{t}_s{w}", obj=probabilities[w] * SS_SLACK_PENALTY)

    def q_col(i: str, t: int, w: int) -> int:
        return q_idx[(i, t, None)] if t <= t_tilde else q_idx[(i, t, w)]

    for i in ends:
        for t in range(1, horizon + 1):
            for w in range(n_sc):
                coeffs: dict[int, float] = {}
                for tau in range(1, t - lead[i] + 1):
                    coeffs[q_col(i, tau, w)] = coeffs.get(q_col(i, tau, w), 0.0) + 1.0
                coeffs[i_idx[(i, t, w)]] = -1.0
                coeffs[b_idx[(i, t, w)]] = 1.0
                rhs = cum_demand[i][w, t - 1] - on_hand[i] - cum_arrivals[i][t - 1]
                builder.add_row(f"bal_{i}_{t}_s{w}", coeffs, "=", rhs)
    for i in comps:
        consumers = [(p, qty) for p, qty in system.bom.parents_of(i) if p in lead]
        for t in range(1, horizon + 1):
            for w in range(n_sc):
                coeffs = {}
                for tau in range(1, t - lead[i] + 1):
                    col = q_col(i, tau, w)
                    coeffs[col] = coeffs.get(col, 0.0) + 1.0
                for parent, qty in consumers:
                    for tau in range(1, t + 1):
                        col = q_col(parent, tau, w)
                        coeffs[col] = coeffs.get(col, 0.0) - qty
                coeffs[i_idx[(i, t, w)]] = -1.0
                rhs = -on_hand[i] - cum_arrivals[i][t - 1]
                builder.add_row(f"bal_{i}_{t}_s{w}", coeffs, "=", rhs)

    for i in items:
        for t in range(1, horizon + 1):
            m = big_m_for(i, t)
            big_m[(i, t)] = m
            scenarios = [None] if t <= t_tilde else list(range(n_sc))
            for w in scenarios:
                col = q_idx[(i, t, w)]
                tag = "" if w is None else f"_s{w}"
                builder.add_row(f"setup_{i}_{t}{tag}", {col: 1.0, y_idx[(i, t)]: -m}, "<", 0.0)

    capacity_rows: list[tuple[str, int, int | None, int]] = []
    for res_id in sorted(system.resources):
        routed = [i for i in items if system.routing[i].resource_id == res_id]
        if not routed:
            continue
        cap = snapshot.capacity[res_id]
        for t in range(1, horizon + 1):
            scenarios = [None] if t <= t_tilde else list(range(n_sc))
            for w in scenarios:
                coeffs = {}
                for i in routed:
                    step = system.routing[i]
                    coeffs[y_idx[(i, t)]] = step.setup_time
                    coeffs[q_idx[(i, t, w)] if w is not None else q_idx[(i, t, None)]] = step.processing_time
                tag = "" if w is None else f"_s{w}"
                row = builder.add_row(f"cap_{res_id}_{t}{tag}", coeffs, "<", float(cap[t - 1]))
                capacity_rows.append((res_id, t, w, row))

    for i in comps:
        target = ss.get(i, 0.0)
        if target <= 0:
            continue
        for t in range(1, horizon):
            for w in range(n_sc):
                builder.add_row(
                    f"ss_{i}_{t}_s{w}",
                    {i_idx[(i, t, w)]: 1.0, g_idx[(i, t, w)]: 1.0},
                    ">",
                    target,
                )

    return MilpInstance(
        problem=builder.build(),
        period=snapshot.period,
        horizon=horizon,
        t_tilde=t_tilde,
        items=items,
        end_items=ends,
        probabilities=probabilities,
        y_idx=y_idx,
        q_idx=q_idx,
        i_idx=i_idx,
        b_idx=b_idx,
        g_idx=g_idx,
        capacity_rows=capacity_rows,
        big_m=big_m,
    )


def build_deterministic(
    system: ProductionSystem,
    snapshot: PlanningSnapshot,
    safety_stocks: dict[str, float] | None = None,
) -> MilpInstance:
    if not snapshot.point_demand:
        raise ValueError("snapshot carries no point demand")
    demand = {
        i: np.asarray(snapshot.point_demand[i], dtype=float).reshape(1, -1)
        for i in snapshot.point_demand
    }
    return build_instance(system, snapshot, demand, np.array([1.0]), snapshot.horizon, safety_stocks)


def build_stochastic(
    system: ProductionSystem,
    snapshot: PlanningSnapshot,
    t_tilde: int,
    safety_stocks: dict[str, float] | None = None,
) -> MilpInstance:
    if snapshot.scenarios is None:
        raise ValueError("snapshot carries no scenario demand")
    values, probs = dedupe_scenarios(snapshot.scenarios.values, snapshot.scenarios.probabilities)
    return build_instance(system, snapshot, values, probs, t_tilde, safety_stocks)


def extract_plan(instance: MilpInstance, x: np.ndarray) -> ProductionPlan:
    """First-stage rows only; setup flags follow positive quantity."""
    plan = ProductionPlan(period=instance.period)
    for i in instance.items:
        for t in range(1, instance.t_tilde + 1):
            qty = float(x[instance.q_idx[(i, t, None)]])
            if qty > QTY_EPS:
                plan.rows.append(
                    PlanRow(item_id=i, period=t, qty=qty, setup=True, release_now=(t == 1))
                )
    plan.rows.sort(key=lambda r: (r.period, r.item_id))
    return plan
