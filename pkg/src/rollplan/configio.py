"""Load production systems from declarative TOML files."""
from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .system import Bom, Item, ItemKind, ProductionSystem, Resource, RouteStep

BUNDLED_SYSTEMS = ("elementary", "medium")


class ConfigError(ValueError):
    pass


def bundled_system_path(name: str) -> Path:
    if name not in BUNDLED_SYSTEMS:
        raise ConfigError(f"unknown bundled system {name!r}; available: {BUNDLED_SYSTEMS}")
    return Path(str(resources.files("rollplan.configs").joinpath(f"{name}.toml")))


def resolve_system_path(name_or_path: str) -> Path:
    if name_or_path in BUNDLED_SYSTEMS:
        return bundled_system_path(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"system config not found: {name_or_path}")
    return path


def read_toml(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def load_system(name_or_path: str) -> ProductionSystem:
    path = resolve_system_path(str(name_or_path))
    doc = read_toml(path)
    return system_from_dict(doc, default_id=path.stem)


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"missing {key!r} in {where}")
    return doc[key]


def system_from_dict(doc: dict, default_id: str = "system") -> ProductionSystem:
    head = doc.get("system", {})
    items: dict[str, Item] = {}
    for raw in doc.get("items", []):
        item_id = str(_require(raw, "id", "items entry"))
        kind = ItemKind(str(_require(raw, "kind", f"item {item_id}")))
        items[item_id] = Item(
            item_id=item_id,
            kind=kind,
            lead_time=int(raw.get("lead_time", 1)),
            mean_demand=float(raw.get("mean_demand", 0.0)),
            production_cost=float(raw.get("production_cost", 0.0)),
            holding_cost=float(raw.get("holding_cost", 0.0)),
            backlog_cost=float(raw.get("backlog_cost", 0.0)),
            lost_sales_cost=float(raw.get("lost_sales_cost", 0.0)),
        )

    bom_entries: dict[tuple[str, str], float] = {}
    for raw in doc.get("bom", []):
        comp = str(_require(raw, "component", "bom entry"))
        parent = str(_require(raw, "parent", "bom entry"))
        bom_entries[(comp, parent)] = float(raw.get("qty", 1.0))

    resources_: dict[str, Resource] = {}
    for raw in doc.get("resources", []):
        res_id = str(_require(raw, "id", "resources entry"))
        resources_[res_id] = Resource(
            resource_id=res_id,
            capacity=float(_require(raw, "capacity", f"resource {res_id}")),
            setup_cov=float(raw.get("setup_cov", 0.0)),
        )

    routing: dict[str, RouteStep] = {}
    for raw in doc.get("routing", []):
        item_id = str(_require(raw, "item", "routing entry"))
        routing[item_id] = RouteStep(
            resource_id=str(_require(raw, "resource", f"routing of {item_id}")),
            setup_time=float(raw.get("setup_time", 0.0)),
            processing_time=float(_require(raw, "processing_time", f"routing of {item_id}")),
            setup_cost=float(raw.get("setup_cost", 0.0)),
        )

    initial_stock = {str(k): float(v) for k, v in doc.get("initial_stock", {}).items()}
    load_presets = {
        str(label): {str(k): float(v) for k, v in mapping.items()}
        for label, mapping in doc.get("load_presets", {}).items()
    }

    return ProductionSystem(
        system_id=str(head.get("id", default_id)),
        items=items,
        bom=Bom(bom_entries),
        resources=resources_,
        routing=routing,
        horizon=int(head.get("horizon", 12)),
        period_minutes=float(head.get("period_minutes", 1440.0)),
        initial_stock=initial_stock,
        load_presets=load_presets,
    )
