"""Capacity-oblivious MRP: netting, lot sizing, time phasing, BOM explosion.

Works entirely on the planning snapshot; the first window period is the
current one, so releases landing before it are clamped into period 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .planning import PlanRow, PlanningSnapshot, ProductionPlan
from .system import ProductionSystem


@dataclass(frozen=True)
class LotPolicy:
    """fop: lot covers the next ``value`` periods of net requirements.
    foq: lots are multiples of ``value`` (multiplier of mean period demand)."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("fop", "foq"):
            raise ValueError(f"unknown lot policy {self.kind!r}")
        if self.kind == "fop" and (self.value < 1 or int(self.value) != self.value):
            raise ValueError("fop period count must be a positive integer")
        if self.kind == "foq" and self.value <= 0:
            raise ValueError("foq multiplier must be positive")

    @staticmethod
    def parse(text: str) -> "LotPolicy":
        kind, _, value = text.partition(":")
        if not value:
            raise ValueError(f"expected '<kind>:<value>', got {text!r}")
        return LotPolicy(kind.strip().lower(), float(value))


@dataclass(frozen=True)
class MrpParams:
    lead_time: int = 1
    ss_mult: float = 0.0
    lot: LotPolicy = LotPolicy("fop", 1)


def net_requirements(
    gross: np.ndarray, receipts: np.ndarray, on_hand: float, safety_stock: float = 0.0
) -> np.ndarray:
    """Shortfall below safety stock per period, assuming shortfalls get covered."""
    gross = np.asarray(gross, dtype=float)
    receipts = np.asarray(receipts, dtype=float)
    net = np.zeros_like(gross)
    projected = float(on_hand)
    for t in range(gross.size):
        projected += receipts[t] - gross[t]
        if projected < safety_stock - 1e-9:
            net[t] = safety_stock - projected
            projected = safety_stock
    return net


def lot_fop(net: np.ndarray, periods: int) -> np.ndarray:
    """Fixed order period: each lot covers the next ``periods`` net requirements."""
    net = np.asarray(net, dtype=float)
    receipts = np.zeros_like(net)
    t = 0
    while t < net.size:
        if net[t] > 0:
            receipts[t] = net[t : t + periods].sum()
            t += periods
        else:
            t += 1
    return receipts


def lot_foq(net: np.ndarray, lot_size: float) -> np.ndarray:
    """Fixed order quantity: smallest multiple of lot_size covering the running shortfall."""
    net = np.asarray(net, dtype=float)
    receipts = np.zeros_like(net)
    covered = 0.0
    for t in range(net.size):
        covered -= net[t]
        if net[t] > 0 and covered < -1e-9:
            lots = int(np.ceil(-covered / lot_size - 1e-12))
            receipts[t] = lots * lot_size
            covered += receipts[t]
    return receipts


def apply_lot_policy(net: np.ndarray, policy: LotPolicy, lot_size: float | None = None) -> np.ndarray:
    if policy.kind == "fop":
        return lot_fop(net, int(policy.value))
    if lot_size is None or lot_size <= 0:
        raise ValueError("foq needs a resolved positive lot size in units")
    return lot_foq(net, lot_size)


def time_phase(receipts: np.ndarray, lead_time: int) -> np.ndarray:
    """Planned releases; anything before the current period piles into period 1."""
    receipts = np.asarray(receipts, dtype=float)
    releases = np.zeros_like(receipts)
    for t in range(receipts.size):
        if receipts[t] > 0:
            releases[max(0, t - lead_time)] += receipts[t]
    return releases


@dataclass
class MrpTableau:
    item_id: str
    gross: np.ndarray
    receipts_scheduled: np.ndarray
    net: np.ndarray
    planned_receipts: np.ndarray
    planned_releases: np.ndarray
    on_hand: float
    safety_stock: float


def run_mrp(
    system: ProductionSystem,
    snapshot: PlanningSnapshot,
    params: MrpParams,
    safety_stocks: dict[str, float] | None = None,
    lot_sizes: dict[str, float] | None = None,
) -> tuple[ProductionPlan, dict[str, MrpTableau]]:
    """One MRP pass over the snapshot, level by level.

    ``safety_stocks`` and ``lot_sizes`` carry the per-item values resolved
    from the multiplier grids; missing entries fall back to the multipliers
    applied to the system's mean requirements.
    """
    horizon = snapshot.horizon
    mean_req = system.mean_requirements()
    if safety_stocks is None:
        safety_stocks = {i: params.ss_mult * mean_req[i] for i in system.producible_items()}
    if lot_sizes is None and params.lot.kind == "foq":
        lot_sizes = {i: params.lot.value * mean_req[i] for i in system.producible_items()}

    gross: dict[str, np.ndarray] = {
        i: np.array(snapshot.point_demand.get(i, np.zeros(horizon)), dtype=float)
        for i in system.producible_items()
    }

    plan = ProductionPlan(period=snapshot.period)
    tableaus: dict[str, MrpTableau] = {}
    for item_id in system.producible_items():
        item = system.items[item_id]
        receipts_scheduled = np.array(snapshot.arrivals.get(item_id, np.zeros(horizon)), dtype=float)
        on_hand = snapshot.on_hand.get(item_id, 0.0)
        ss = safety_stocks.get(item_id, 0.0)
        net = net_requirements(gross[item_id], receipts_scheduled, on_hand, ss)
        lot_size = None if lot_sizes is None else lot_sizes.get(item_id)
        planned = apply_lot_policy(net, params.lot, lot_size)
        releases = time_phase(planned, params.lead_time)
        tableaus[item_id] = MrpTableau(
            item_id, gross[item_id], receipts_scheduled, net, planned, releases, on_hand, ss
        )
        for comp, qty in system.bom.components_of(item_id):
            if comp in gross:
                gross[comp] = gross[comp] + qty * releases
        for t in range(horizon):
            if releases[t] > 0:
                plan.rows.append(
                    PlanRow(
                        item_id=item_id,
                        period=t + 1,
                        qty=float(releases[t]),
                        setup=True,
                        release_now=(t == 0),
                    )
                )
    plan.rows.sort(key=lambda r: (r.period, r.item_id))
    return plan, tableaus


def tableau_csv_rows(tableaus: dict[str, MrpTableau]) -> list[list]:
    rows: list[list] = [["item", "row", *[f"t{t+1}" for t in range(next(iter(tableaus.values())).gross.size)]]] if tableaus else []
    for item_id in sorted(tableaus):
        tab = tableaus[item_id]
        for label, arr in (
            ("gross", tab.gross),
            ("scheduled", tab.receipts_scheduled),
            ("net", tab.net),
            ("planned_receipts", tab.planned_receipts),
            ("planned_releases", tab.planned_releases),
        ):
            rows.append([item_id, label, *[repr(float(v)) for v in arr]])
    return rows
