"""Production system structure: items, BOM, resources, routing.

A ProductionSystem is immutable after construction; the ``with_*`` helpers
return modified copies so experiment knobs (load level, planned lead time)
never mutate shared state.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class ItemKind(str, Enum):
    END = "end"
    COMPONENT = "component"
    RAW = "raw"


@dataclass(frozen=True)
class Item:
    item_id: str
    kind: ItemKind
    lead_time: int = 1
    mean_demand: float = 0.0
    production_cost: float = 0.0
    holding_cost: float = 0.0
    backlog_cost: float = 0.0
    lost_sales_cost: float = 0.0


@dataclass(frozen=True)
class RouteStep:
    """Times in minutes; processing is per unit, setup per production order."""

    resource_id: str
    setup_time: float
    processing_time: float
    setup_cost: float = 0.0


@dataclass(frozen=True)
class Resource:
    resource_id: str
    capacity: float
    setup_cov: float = 0.0


class Bom:
    """Direct requirements: qty units of component per unit of parent."""

    def __init__(self, entries: dict[tuple[str, str], float]):
        self._entries = dict(entries)
        self._children: dict[str, list[tuple[str, float]]] = {}
        self._parents: dict[str, list[tuple[str, float]]] = {}
        for (comp, parent), qty in sorted(self._entries.items()):
            self._children.setdefault(parent, []).append((comp, qty))
            self._parents.setdefault(comp, []).append((parent, qty))

    @property
    def entries(self) -> dict[tuple[str, str], float]:
        return dict(self._entries)

    def components_of(self, parent: str) -> list[tuple[str, float]]:
        return list(self._children.get(parent, []))

    def parents_of(self, comp: str) -> list[tuple[str, float]]:
        return list(self._parents.get(comp, []))

    def qty(self, comp: str, parent: str) -> float:
        return self._entries.get((comp, parent), 0.0)


@dataclass(frozen=True)
class ProductionSystem:
    system_id: str
    items: dict[str, Item]
    bom: Bom
    resources: dict[str, Resource]
    routing: dict[str, RouteStep]
    horizon: int = 12
    period_minutes: float = 1440.0
    initial_stock: dict[str, float] = field(default_factory=dict)
    load_presets: dict[str, dict[str, float]] = field(default_factory=dict)

    def end_items(self) -> list[str]:
        return sorted(i for i, it in self.items.items() if it.kind is ItemKind.END)

    def component_items(self) -> list[str]:
        return sorted(i for i, it in self.items.items() if it.kind is ItemKind.COMPONENT)

    def producible_items(self) -> list[str]:
        """End items and components ordered by low-level code, then id."""
        levels = self.low_level_codes()
        ids = self.end_items() + self.component_items()
        return sorted(ids, key=lambda i: (levels[i], i))

    def low_level_codes(self) -> dict[str, int]:
        """0 for end items, 1 + max(consumer level) below; raws included."""
        codes = {i: 0 for i in self.items}
        # iterate until stable; BOM depth is tiny and validated acyclic
        for _ in range(len(self.items) + 1):
            changed = False
            for (comp, parent) in self.bom.entries:
                want = codes[parent] + 1
                if codes.get(comp, 0) < want:
                    codes[comp] = want
                    changed = True
            if not changed:
                break
        return codes

    def mean_requirements(self) -> dict[str, float]:
        """Expected units per period by item, BOM-exploded from end-item forecasts."""
        req = {i: 0.0 for i in self.items}
        for i in self.end_items():
            req[i] = self.items[i].mean_demand
        order = sorted(self.items, key=lambda i: self.low_level_codes()[i])
        for parent in order:
            for comp, qty in self.bom.components_of(parent):
                req[comp] += qty * req[parent]
        return req

    def with_processing_times(self, times: dict[str, float]) -> ProductionSystem:
        routing = dict(self.routing)
        for item_id, p in times.items():
            if item_id in routing:
                routing[item_id] = replace(routing[item_id], processing_time=float(p))
        return replace(self, routing=routing)

    def with_load(self, label: str) -> ProductionSystem:
        key = str(label)
        if key not in self.load_presets:
            raise KeyError(f"system {self.system_id!r} has no load preset {label!r}")
        return self.with_processing_times(self.load_presets[key])

    def with_lead_times(self, lead_time: int) -> ProductionSystem:
        items = {
            i: (replace(it, lead_time=int(lead_time)) if it.kind is not ItemKind.RAW else it)
            for i, it in self.items.items()
        }
        return replace(self, items=items)

    def with_setup_cov(self, cov: float) -> ProductionSystem:
        resources = {k: replace(r, setup_cov=float(cov)) for k, r in self.resources.items()}
        return replace(self, resources=resources)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _find_cycle(bom: Bom, items: dict[str, Item]) -> list[str] | None:
    state: dict[str, int] = {}

    def visit(node: str, path: list[str]) -> list[str] | None:
        state[node] = 1
        for comp, _ in bom.components_of(node):
            if state.get(comp, 0) == 1:
                return path + [node, comp]
            if state.get(comp, 0) == 0:
                found = visit(comp, path + [node])
                if found:
                    return found
        state[node] = 2
        return None

    for i in items:
        if state.get(i, 0) == 0:
            found = visit(i, [])
            if found:
                return found
    return None


def validate_system(system: ProductionSystem) -> ValidationReport:
    report = ValidationReport()
    add = report.violations.append

    for (comp, parent), qty in system.bom.entries.items():
        if comp not in system.items:
            add(f"bom references unknown component {comp!r}")
        if parent not in system.items:
            add(f"bom references unknown parent {parent!r}")
        if qty <= 0:
            add(f"bom qty for ({comp!r}, {parent!r}) must be positive, got {qty}")
        if parent in system.items and system.items[parent].kind is ItemKind.RAW:
            add(f"raw item {parent!r} cannot have components")
        if comp in system.items and system.items[comp].kind is ItemKind.END:
            add(f"end item {comp!r} cannot be a component of {parent!r}")

    cycle = _find_cycle(system.bom, system.items)
    if cycle:
        add("bom contains a cycle: " + " -> ".join(cycle))

    for item_id, item in sorted(system.items.items()):
        producible = item.kind in (ItemKind.END, ItemKind.COMPONENT)
        step = system.routing.get(item_id)
        if producible and step is None:
            add(f"producible item {item_id!r} has no routing")
        if not producible and step is not None:
            add(f"raw item {item_id!r} must not have routing")
        if producible and item.lead_time < 1:
            add(f"item {item_id!r} lead_time must be >= 1, got {item.lead_time}")
        for name in ("production_cost", "holding_cost", "backlog_cost", "lost_sales_cost"):
            if getattr(item, name) < 0:
                add(f"item {item_id!r} {name} must be >= 0")
        if item.kind is ItemKind.END:
            if item.mean_demand < 0:
                add(f"end item {item_id!r} mean_demand must be >= 0")
            if item.lost_sales_cost < item.backlog_cost:
                add(
                    f"end item {item_id!r} lost_sales_cost {item.lost_sales_cost} "
                    f"< backlog_cost {item.backlog_cost}"
                )

    for item_id, step in sorted(system.routing.items()):
        if item_id not in system.items:
            add(f"routing references unknown item {item_id!r}")
            continue
        res = system.resources.get(step.resource_id)
        if res is None:
            add(f"routing of {item_id!r} references unknown resource {step.resource_id!r}")
            continue
        if step.setup_time < 0 or step.processing_time < 0 or step.setup_cost < 0:
            add(f"routing of {item_id!r} has negative times or cost")
        if step.setup_time >= res.capacity:
            add(
                f"setup time {step.setup_time} of {item_id!r} does not fit the per-period "
                f"capacity {res.capacity} of {step.resource_id!r}"
            )

    for res_id, res in sorted(system.resources.items()):
        if res.capacity <= 0:
            add(f"resource {res_id!r} capacity must be positive")
        if res.setup_cov < 0:
            add(f"resource {res_id!r} setup_cov must be >= 0")

    if system.horizon < 1:
        add(f"horizon must be >= 1, got {system.horizon}")
    for item_id, qty in system.initial_stock.items():
        if item_id not in system.items:
            add(f"initial_stock references unknown item {item_id!r}")
        elif qty < 0:
            add(f"initial_stock for {item_id!r} must be >= 0")

    return report


def planned_shop_load(system: ProductionSystem) -> dict[str, float]:
    """Planned utilization per resource.

    One setup per item and period for every routed item with positive mean
    requirement, plus per-unit processing of the exploded mean demand,
    against nominal period capacity.
    """
    req = system.mean_requirements()
    load: dict[str, float] = {}
    for res_id, res in sorted(system.resources.items()):
        minutes = 0.0
        for item_id, step in sorted(system.routing.items()):
            if step.resource_id != res_id:
                continue
            mean = req.get(item_id, 0.0)
            if mean > 0:
                minutes += step.setup_time + mean * step.processing_time
        load[res_id] = minutes / res.capacity
    return load
