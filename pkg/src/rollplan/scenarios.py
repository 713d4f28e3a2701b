"""Forecast-deviation tracking and demand scenario sampling.

Deviation samples (final minus forecast at offset b) are collected whenever
an order is realized; the sigma estimate per (item, b) cell is the sample
standard deviation, frozen at the end of warm-up. Cells with fewer than two
samples fall back to the parametric value alpha * F * sqrt(pending updates),
which is also what the stochastic planner uses while warm-up is running.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .demand import CustomerBehavior, OrderForecast, truncated_normal
from .planning import DemandScenarios

MIN_SAMPLES = 2


@dataclass
class SigmaTable:
    horizon: int
    values: dict[tuple[str, int], float] = field(default_factory=dict)
    counts: dict[tuple[str, int], int] = field(default_factory=dict)

    def sigma(self, item_id: str, b: int) -> float:
        if b <= 0:
            return 0.0  # offset 0 is the realization
        return self.values.get((item_id, b), 0.0)

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["item", "b", "sigma", "n_samples"])
            for (item_id, b) in sorted(self.values):
                writer.writerow([item_id, b, repr(self.values[(item_id, b)]), self.counts.get((item_id, b), 0)])

    @staticmethod
    def read_csv(path: str | Path) -> "SigmaTable":
        values: dict[tuple[str, int], float] = {}
        counts: dict[tuple[str, int], int] = {}
        max_b = 0
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["item"], int(row["b"]))
                values[key] = float(row["sigma"])
                counts[key] = int(row["n_samples"])
                max_b = max(max_b, key[1])
        return SigmaTable(horizon=max_b, values=values, counts=counts)


def parametric_sigma(behavior: CustomerBehavior, means: dict[str, float]) -> SigmaTable:
    """alpha * F * sqrt(number of updates still pending below offset b)."""
    table = SigmaTable(horizon=behavior.horizon)
    for item_id, mean in sorted(means.items()):
        for b in range(1, behavior.horizon + 1):
            pending = behavior.pending_updates(b)
            table.values[(item_id, b)] = behavior.alpha * mean * math.sqrt(pending)
            table.counts[(item_id, b)] = 0
    return table


@dataclass
class DeviationTracker:
    horizon: int
    samples: dict[tuple[str, int], list[float]] = field(default_factory=dict)

    def record(self, order: OrderForecast) -> None:
        """Store final-minus-forecast deviations once the order is realized."""
        final = order.final
        for b in range(1, self.horizon + 1):
            if b in order.values:
                self.samples.setdefault((order.item_id, b), []).append(final - order.values[b])

    def n_samples(self, item_id: str, b: int) -> int:
        return len(self.samples.get((item_id, b), ()))


def estimate_sigma(tracker: DeviationTracker, fallback: SigmaTable | None = None) -> SigmaTable:
    table = SigmaTable(horizon=tracker.horizon)
    keys = set(tracker.samples)
    if fallback is not None:
        keys |= set(fallback.values)
    for key in sorted(keys):
        obs = tracker.samples.get(key, [])
        if len(obs) >= MIN_SAMPLES:
            table.values[key] = float(np.std(obs, ddof=1))
            table.counts[key] = len(obs)
        else:
            table.values[key] = fallback.sigma(*key) if fallback is not None else 0.0
            table.counts[key] = len(obs)
    return table


def sample_scenarios(
    point_demand: dict[str, np.ndarray],
    sigma_table: SigmaTable,
    n_scenarios: int,
    rng: np.random.Generator,
) -> DemandScenarios:
    """Independent truncated draws around the current forecasts.

    Window period m carries offset b = m - 1; the first period is realized
    demand and stays exact. Truncation to [0, 2 * forecast] keeps scenarios
    nonnegative and mean-preserving.
    """
    if n_scenarios < 1:
        raise ValueError("need at least one scenario")
    values: dict[str, np.ndarray] = {}
    for item_id in sorted(point_demand):
        point = np.asarray(point_demand[item_id], dtype=float)
        horizon = point.size
        out = np.tile(point, (n_scenarios, 1))
        for m in range(2, horizon + 1):
            mean = point[m - 1]
            sigma = sigma_table.sigma(item_id, m - 1)
            if sigma <= 0 or mean < 0:
                continue
            out[:, m - 1] = truncated_normal(
                rng,
                np.full(n_scenarios, mean),
                np.full(n_scenarios, sigma),
                np.zeros(n_scenarios),
                np.full(n_scenarios, 2.0 * mean),
            )
        values[item_id] = out
    probs = np.full(n_scenarios, 1.0 / n_scenarios)
    return DemandScenarios(values=values, probabilities=probs)
