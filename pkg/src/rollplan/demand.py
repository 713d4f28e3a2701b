"""Forecast evolution for customer orders.

Each order (item, due date) enters the information horizon T periods before
its due date at the long-term mean and receives additive updates at
behavior-specific offsets. The value at offset 0 is the realized amount and
never changes afterwards. Updates are truncated so forecasts stay positive:
an update at offset b is conditioned on (-D_prev, +D_prev).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

CUSTOMER_KINDS = ("a", "b", "c")


@dataclass(frozen=True)
class CustomerBehavior:
    """Update schedule: a = entry only, b = entry and offset 1, c = every offset."""

    kind: str
    alpha: float
    horizon: int = 12

    def __post_init__(self):
        if self.kind not in CUSTOMER_KINDS:
            raise ValueError(f"unknown customer kind {self.kind!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")

    @property
    def update_offsets(self) -> frozenset[int]:
        t = self.horizon
        if self.kind == "a":
            return frozenset({t})
        if self.kind == "b":
            return frozenset({1, t})
        return frozenset(range(1, t + 1))

    def pending_updates(self, b: int) -> int:
        """Updates still outstanding once the offset-b value is known."""
        return sum(1 for o in self.update_offsets if 1 <= o <= b - 1)


def draw_update(rng: np.random.Generator, sigma: float, bound: float, max_rounds: int = 200) -> float:
    """One additive update from N(0, sigma) conditioned on (-bound, bound)."""
    if sigma <= 0 or bound <= 0:
        return 0.0
    for _ in range(max_rounds):
        eps = sigma * rng.standard_normal()
        if -bound < eps < bound:
            return eps
    # pathological sigma/bound ratio: symmetric fallback keeps the martingale
    return rng.uniform(-bound, bound)


def truncated_normal(
    rng: np.random.Generator,
    mean: np.ndarray,
    sigma: np.ndarray,
    low: np.ndarray,
    high: np.ndarray,
    max_rounds: int = 200,
) -> np.ndarray:
    """Vectorized N(mean, sigma) conditioned on [low, high] with uniform fallback."""
    mean, sigma, low, high = np.broadcast_arrays(
        np.asarray(mean, dtype=float),
        np.asarray(sigma, dtype=float),
        np.asarray(low, dtype=float),
        np.asarray(high, dtype=float),
    )
    out = np.clip(mean, low, high).copy()
    pending = sigma > 0
    for _ in range(max_rounds):
        if not pending.any():
            break
        idx = np.flatnonzero(pending)
        draw = mean[idx] + sigma[idx] * rng.standard_normal(idx.size)
        ok = (draw >= low[idx]) & (draw <= high[idx])
        out[idx[ok]] = draw[ok]
        pending[idx[ok]] = False
    if pending.any():
        idx = np.flatnonzero(pending)
        out[idx] = rng.uniform(low[idx], high[idx])
    return out


class DemandSource(Protocol):
    def next_value(self, item_id: str, due: int, b: int, prev: float, mean: float) -> float:
        ...


@dataclass
class MmfeDemandSource:
    """Live generator following the behavior's update schedule."""

    behavior: CustomerBehavior
    rng: np.random.Generator

    def next_value(self, item_id: str, due: int, b: int, prev: float, mean: float) -> float:
        if b == 0 or b not in self.behavior.update_offsets:
            return prev
        sigma = self.behavior.alpha * mean
        if sigma <= 0 or prev <= 0:
            return prev
        return prev + draw_update(self.rng, sigma, prev)


@dataclass
class ReplayDemandSource:
    """Feeds recorded values; falls back to carrying the previous value."""

    table: dict[tuple[str, int, int], float]

    def next_value(self, item_id: str, due: int, b: int, prev: float, mean: float) -> float:
        return self.table.get((item_id, due, b), prev)


@dataclass
class OrderForecast:
    item_id: str
    due: int
    values: dict[int, float] = field(default_factory=dict)

    @property
    def current_b(self) -> int:
        return min(self.values)

    @property
    def final(self) -> float:
        return self.values[0]

    def value_at(self, b: int, mean: float) -> float:
        if b in self.values:
            return self.values[b]
        return mean  # before entering the information horizon


class ForecastMatrix:
    """All order forecasts of one replication, keyed by (item, due date)."""

    def __init__(self, horizon: int, means: dict[str, float]):
        self.horizon = int(horizon)
        self.means = dict(means)
        self.orders: dict[tuple[str, int], OrderForecast] = {}

    def order(self, item_id: str, due: int) -> OrderForecast:
        return self.orders[(item_id, due)]

    def has_order(self, item_id: str, due: int) -> bool:
        return (item_id, due) in self.orders

    def final(self, item_id: str, due: int) -> float:
        o = self.orders.get((item_id, due))
        if o is None:
            return 0.0
        return o.final

    def latest(self, item_id: str, due: int) -> float:
        o = self.orders.get((item_id, due))
        if o is None:
            return self.means.get(item_id, 0.0)
        return o.values[o.current_b]

    def create_order(self, item_id: str, due: int, source: DemandSource) -> OrderForecast:
        key = (item_id, due)
        if key in self.orders:
            raise ValueError(f"order {key} already exists")
        mean = self.means[item_id]
        order = OrderForecast(item_id, due)
        order.values[self.horizon] = source.next_value(item_id, due, self.horizon, mean, mean)
        self.orders[key] = order
        return order

    def advance_order(self, item_id: str, due: int, b_target: int, source: DemandSource) -> OrderForecast:
        order = self.orders[(item_id, due)]
        mean = self.means[item_id]
        for b in range(order.current_b - 1, b_target - 1, -1):
            prev = order.values[b + 1]
            value = source.next_value(item_id, due, b, prev, mean)
            if b == 0:
                value = prev  # realized amount, no final-period update
            order.values[b] = value
        return order

    def export_rows(self) -> list[tuple[str, int, int, float]]:
        rows = []
        for (item_id, due) in sorted(self.orders):
            order = self.orders[(item_id, due)]
            for b in sorted(order.values, reverse=True):
                rows.append((item_id, due, b, order.values[b]))
        return rows


def seed_initial_orders(matrix: ForecastMatrix, end_items: list[str], source: DemandSource) -> None:
    """State as of period 0: orders due 1..T already evolved to offset = due."""
    for item_id in sorted(end_items):
        for due in range(1, matrix.horizon + 1):
            matrix.create_order(item_id, due, source)
            matrix.advance_order(item_id, due, due, source)


def update_period(matrix: ForecastMatrix, end_items: list[str], period: int, source: DemandSource) -> None:
    """One demand step: create the entering order, roll open orders forward.

    After this call the order due at ``period`` is finalized (offset 0).
    """
    for item_id in sorted(end_items):
        matrix.create_order(item_id, period + matrix.horizon, source)
        for due in range(period, period + matrix.horizon):
            matrix.advance_order(item_id, due, due - period, source)


def write_demand_csv(matrix: ForecastMatrix, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "due_date", "b", "value"])
        for item_id, due, b, value in matrix.export_rows():
            writer.writerow([item_id, due, b, repr(value)])


def read_demand_csv(path: str | Path) -> ReplayDemandSource:
    table: dict[tuple[str, int, int], float] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            table[(row["item"], int(row["due_date"]), int(row["b"]))] = float(row["value"])
    return ReplayDemandSource(table)
