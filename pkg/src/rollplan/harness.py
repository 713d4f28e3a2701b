"""Experiment orchestration: single runs, grids, sweeps, and report tables.

A cell is one parameter combination; its id is a content hash of the
semantically relevant fields, so reruns land in the same place and finished
cells can be skipped on resume. Replications inside a cell share the demand
stream with every other planner run on the same system, customer, alpha,
and replication index.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .configio import ConfigError, load_system, read_toml, resolve_system_path
from .demand import read_demand_csv, write_demand_csv
from .milp import SolverLimits
from .planners import PLANNER_KINDS, make_planner
from .simulation import KpiRates, ReplicationResult, Simulation
from .system import ProductionSystem, planned_shop_load, validate_system

log = logging.getLogger("rollplan")

SEMANTIC_FIELDS = (
    "system",
    "load",
    "customer",
    "alpha",
    "planner",
    "lead_time",
    "ss_mult",
    "lot",
    "n_scenarios",
    "t_tilde",
    "periods",
    "warmup",
    "replications",
    "base_seed",
    "setup_cov",
    "mip_gap",
    "mip_time_limit_s",
    "mip_node_limit",
)


@dataclass
class RunConfig:
    system: str = "elementary"
    load: str | None = "98"
    customer: str = "a"
    alpha: float = 0.0
    planner: str = "mrp"
    lead_time: int = 1
    ss_mult: float = 0.0
    lot: str = "fop:1"
    n_scenarios: int = 30
    t_tilde: int | None = None
    periods: int = 400
    warmup: int = 40
    replications: int = 1
    base_seed: int = 7
    setup_cov: float | None = None
    mip_gap: float = 1e-6
    mip_time_limit_s: float | None = None
    mip_node_limit: int | None = None
    demand_replay: str | None = None
    dump_mrp_tableau: bool = False
    dump_solutions: bool = False

    def __post_init__(self):
        if self.planner not in PLANNER_KINDS:
            raise ConfigError(f"unknown planner {self.planner!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not 0 <= self.warmup < self.periods:
            raise ConfigError("warmup must be >= 0 and below the run length")


def config_from_dict(data: dict) -> RunConfig:
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown run option(s): {sorted(unknown)}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def cell_id(config: RunConfig) -> str:
    payload = {k: getattr(config, k) for k in SEMANTIC_FIELDS}
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha1(blob.encode()).hexdigest()[:12]


def assemble_system(config: RunConfig) -> ProductionSystem:
    system = load_system(resolve_system_path(config.system))
    if config.load is not None:
        try:
            system = system.with_load(config.load)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    system = system.with_lead_times(config.lead_time)
    if config.setup_cov is not None:
        system = system.with_setup_cov(config.setup_cov)
    report = validate_system(system)
    if not report.ok:
        raise ConfigError("invalid system: " + "; ".join(report.violations))
    return system


def solver_limits(config: RunConfig) -> SolverLimits:
    return SolverLimits(
        gap=config.mip_gap,
        time_limit_s=config.mip_time_limit_s,
        node_limit=config.mip_node_limit,
    )


def build_simulation(config: RunConfig, replication: int, on_plan=None) -> Simulation:
    system = assemble_system(config)
    from .demand import CustomerBehavior

    behavior = CustomerBehavior(kind=config.customer, alpha=config.alpha, horizon=system.horizon)
    planner = make_planner(
        config.planner,
        system,
        lead_time=config.lead_time,
        ss_mult=config.ss_mult,
        lot=config.lot,
        n_scenarios=config.n_scenarios,
        t_tilde=config.t_tilde,
        limits=solver_limits(config),
        keep_debug=config.dump_mrp_tableau or config.dump_solutions,
    )
    source = None
    if config.demand_replay is not None:
        source = read_demand_csv(config.demand_replay)
    return Simulation(
        system=system,
        behavior=behavior,
        planner=planner,
        n_periods=config.periods,
        warmup=config.warmup,
        base_seed=config.base_seed,
        replication=replication,
        rates=KpiRates(),
        demand_source=source,
        on_plan=on_plan,
    )


def _write_csv(path: Path, rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _rep_summary(result: ReplicationResult) -> dict:
    return {
        "mean_cost": result.mean_cost,
        "service_level": result.service_level,
        "mean_tardy": float(result.tardy[result.warmup :].mean()),
        "mean_fgi": float(result.fgi[result.warmup :].mean()),
        "utilization": result.utilization,
        "solver_calls": result.solver_calls,
        "solver_wall_s": result.solver_wall_s,
        "solver_max_wall_s": result.solver_max_wall_s,
        "solver_nodes": result.solver_nodes,
        "solver_limit_hits": result.solver_limit_hits,
    }


def run_single(config: RunConfig, out_dir: str | Path) -> dict:
    """Run every replication of one configuration and write its outputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    reps = []
    for rep in range(config.replications):
        debug_rows: list[list] = []
        solution_rows: list[list] = []

        def on_plan(period, snapshot, outcome, _dbg=debug_rows, _sol=solution_rows):
            if config.dump_mrp_tableau and "tableau_rows" in outcome.extras:
                for row in outcome.extras["tableau_rows"]:
                    _dbg.append([period, *row])
            if config.dump_solutions and "instance" in outcome.extras:
                inst = outcome.extras["instance"]
                x = outcome.extras["x"]
                for name, col in zip(inst.problem.names, range(x.size)):
                    if abs(x[col]) > 1e-9:
                        _sol.append([period, name, repr(float(x[col]))])

        hook = on_plan if (config.dump_mrp_tableau or config.dump_solutions) else None
        sim = build_simulation(config, rep, on_plan=hook)
        result = sim.run()
        _write_csv(out / "traces" / f"rep{rep}.csv", result.trace_rows())
        write_demand_csv(result.matrix, out / "demand" / f"rep{rep}.csv")
        if result.sigma_table is not None:
            result.sigma_table.write_csv(out / "sigma" / f"rep{rep}.csv")
        if debug_rows:
            _write_csv(out / "debug" / f"mrp_tableau_rep{rep}.csv", debug_rows)
        if solution_rows:
            _write_csv(
                out / "debug" / f"solutions_rep{rep}.csv",
                [["period", "variable", "value"], *solution_rows],
            )
        reps.append(_rep_summary(result))
    costs = np.array([r["mean_cost"] for r in reps])
    services = np.array([r["service_level"] for r in reps])
    summary = {
        "cell_id": cell_id(config),
        "config": asdict(config),
        "replications": reps,
        "mean_cost": float(costs.mean()),
        "sem_cost": float(costs.std(ddof=1) / np.sqrt(costs.size)) if costs.size > 1 else 0.0,
        "service_level": float(services.mean()),
        "mean_tardy": float(np.mean([r["mean_tardy"] for r in reps])),
        "solver_calls": int(sum(r["solver_calls"] for r in reps)),
        "solver_wall_s": float(sum(r["solver_wall_s"] for r in reps)),
        "solver_max_wall_s": float(max(r["solver_max_wall_s"] for r in reps)),
        "solver_nodes": int(sum(r["solver_nodes"] for r in reps)),
        "solver_limit_hits": int(sum(r["solver_limit_hits"] for r in reps)),
        "wall_s": time.perf_counter() - started,
    }
    with open(out / "run.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


class ExperimentGrid:
    """Cartesian grids per planner over shared context axes."""

    def __init__(self, spec: dict):
        sweep = dict(spec.get("sweep", {}))
        self.sweep_id = str(sweep.pop("id", "sweep"))
        self.base = {
            "system": sweep.pop("system", "elementary"),
            "periods": int(sweep.pop("periods", 400)),
            "warmup": int(sweep.pop("warmup", 40)),
            "replications": int(sweep.pop("replications", 1)),
            "base_seed": int(sweep.pop("base_seed", 7)),
        }
        if "setup_cov" in sweep:
            self.base["setup_cov"] = float(sweep.pop("setup_cov"))
        if "mip_gap" in sweep:
            self.base["mip_gap"] = float(sweep.pop("mip_gap"))
        if "mip_time_limit_s" in sweep:
            self.base["mip_time_limit_s"] = float(sweep.pop("mip_time_limit_s"))
        if "mip_node_limit" in sweep:
            self.base["mip_node_limit"] = int(sweep.pop("mip_node_limit"))
        self.loads = [str(v) for v in sweep.pop("loads", ["98"])]
        self.customers = [str(v) for v in sweep.pop("customers", ["a"])]
        self.alphas = [float(v) for v in sweep.pop("alphas", [0.0])]
        if sweep:
            raise ConfigError(f"unknown sweep option(s): {sorted(sweep)}")
        self.planners: dict[str, dict] = {}
        for kind, grid in dict(spec.get("planners", {})).items():
            if kind not in PLANNER_KINDS:
                raise ConfigError(f"unknown planner grid {kind!r}")
            self.planners[kind] = dict(grid)
        if not self.planners:
            raise ConfigError("sweep defines no planner grids")
        for kind in self.planners:
            self._planner_combos(kind)

    def _planner_combos(self, kind: str) -> tuple[int, list[dict]]:
        grid = dict(self.planners[kind])
        crossed = grid.pop("crossed", None)
        lead_times = [int(v) for v in grid.pop("lead_times", [1])]
        ss_mults = [float(v) for v in grid.pop("ss_mults", [0.0])]
        combos: list[dict] = []
        count: int
        if kind == "mrp":
            lots = [str(v) for v in grid.pop("lots", ["fop:1"])]
            if crossed is not None:
                fop = list(crossed.get("fop_periods", []))
                foq = list(crossed.get("foq_mults", []))
                count = len(lead_times) * len(ss_mults) * len(fop) * len(foq)
                combos = []  # count-only profile, not runnable
            else:
                count = len(lead_times) * len(ss_mults) * len(lots)
                combos = [
                    {"planner": "mrp", "lead_time": lt, "ss_mult": ss, "lot": lot}
                    for lt in lead_times
                    for ss in ss_mults
                    for lot in lots
                ]
        elif kind == "det":
            count = len(lead_times) * len(ss_mults)
            combos = [
                {"planner": "det", "lead_time": lt, "ss_mult": ss}
                for lt in lead_times
                for ss in ss_mults
            ]
        else:
            n_scen = [int(v) for v in grid.pop("n_scenarios", [30])]
            t_tildes = [int(v) for v in grid.pop("t_tildes", [12])]
            count = len(lead_times) * len(ss_mults) * len(n_scen) * len(t_tildes)
            combos = [
                {"planner": "stoch", "lead_time": lt, "ss_mult": ss, "n_scenarios": n, "t_tilde": tt}
                for lt in lead_times
                for ss in ss_mults
                for n in n_scen
                for tt in t_tildes
            ]
        if grid:
            raise ConfigError(f"unknown option(s) in planner grid {kind!r}: {sorted(grid)}")
        return count, combos

    @property
    def context_count(self) -> int:
        return len(self.loads) * len(self.customers) * len(self.alphas)

    def cardinality(self) -> dict[str, int]:
        counts = {}
        for kind in sorted(self.planners):
            n, _ = self._planner_combos(kind)
            counts[kind] = n * self.context_count
        counts["total"] = sum(counts.values())
        return counts

    @property
    def count_only(self) -> bool:
        return any("crossed" in g for g in self.planners.values())

    def cells(self) -> list[RunConfig]:
        if self.count_only:
            raise ConfigError(
                "this grid crosses lot axes for cardinality accounting only; "
                "it cannot be run"
            )
        out: list[RunConfig] = []
        for kind in sorted(self.planners):
            _, combos = self._planner_combos(kind)
            for load in self.loads:
                for customer in self.customers:
                    for alpha in self.alphas:
                        for combo in combos:
                            out.append(
                                config_from_dict(
                                    {
                                        **self.base,
                                        "load": load,
                                        "customer": customer,
                                        "alpha": alpha,
                                        **combo,
                                    }
                                )
                            )
        return out


def load_grid(path: str | Path) -> ExperimentGrid:
    return ExperimentGrid(read_toml(Path(path)))


def _sweep_worker(args: tuple) -> dict:
    config_dict, out_dir = args
    config = config_from_dict(config_dict)
    return run_single(config, out_dir)


CELL_COLUMNS = [
    "cell_id",
    "planner",
    "system",
    "customer",
    "alpha",
    "load",
    "lead_time",
    "ss_mult",
    "lot",
    "n_scenarios",
    "t_tilde",
    "replications",
    "mean_cost",
    "sem_cost",
    "service_level",
    "mean_tardy",
    "solver_calls",
    "solver_wall_s",
    "solver_max_wall_s",
    "solver_nodes",
    "solver_limit_hits",
    "wall_s",
]


def _cell_row(summary: dict) -> list:
    cfg = summary["config"]
    lot = cfg["lot"] if cfg["planner"] == "mrp" else ""
    n_scen = cfg["n_scenarios"] if cfg["planner"] == "stoch" else ""
    t_tilde = cfg["t_tilde"] if cfg["planner"] == "stoch" else ""
    return [
        summary["cell_id"],
        cfg["planner"],
        cfg["system"],
        cfg["customer"],
        repr(float(cfg["alpha"])),
        cfg["load"],
        cfg["lead_time"],
        repr(float(cfg["ss_mult"])),
        lot,
        n_scen,
        t_tilde,
        cfg["replications"],
        repr(float(summary["mean_cost"])),
        repr(float(summary["sem_cost"])),
        repr(float(summary["service_level"])),
        repr(float(summary["mean_tardy"])),
        summary["solver_calls"],
        repr(float(summary["solver_wall_s"])),
        repr(float(summary["solver_max_wall_s"])),
        summary["solver_nodes"],
        summary["solver_limit_hits"],
        repr(float(summary["wall_s"])),
    ]


def run_sweep(
    grid: ExperimentGrid,
    out_root: str | Path,
    workers: int = 1,
    resume: bool = False,
    dry_run: bool = False,
) -> dict:
    counts = grid.cardinality()
    if dry_run:
        return {"sweep_id": grid.sweep_id, "cardinality": counts, "dry_run": True}
    cells = grid.cells()
    out = Path(out_root) / grid.sweep_id
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    summaries: dict[str, dict] = {}
    pending: list[tuple[dict, str]] = []
    for config in cells:
        cid = cell_id(config)
        marker = out / "cells" / cid / "run.json"
        if resume and marker.exists():
            with open(marker) as fh:
                summaries[cid] = json.load(fh)
            log.info("skipping finished cell %s", cid)
            continue
        pending.append((asdict(config), str(out / "cells" / cid)))
    log.info("sweep %s: %d cells, %d to run", grid.sweep_id, len(cells), len(pending))
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for summary in pool.map(_sweep_worker, pending):
                summaries[summary["cell_id"]] = summary
                log.info("cell %s done: mean_cost=%.2f", summary["cell_id"], summary["mean_cost"])
    else:
        for args in pending:
            summary = _sweep_worker(args)
            summaries[summary["cell_id"]] = summary
            log.info("cell %s done: mean_cost=%.2f", summary["cell_id"], summary["mean_cost"])
    rows = [CELL_COLUMNS]
    for config in cells:
        rows.append(_cell_row(summaries[cell_id(config)]))
    _write_csv(out / "cells.csv", rows)
    meta = {
        "sweep_id": grid.sweep_id,
        "cardinality": counts,
        "n_cells": len(cells),
        "wall_s": time.perf_counter() - started,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return meta


def read_cells_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def report_table(cells: list[dict]) -> list[list]:
    """Best parameterization per planner within each demand context."""
    contexts: dict[tuple, dict[str, dict]] = {}
    for row in cells:
        ctx = (row["system"], row["customer"], row["alpha"], row["load"])
        best = contexts.setdefault(ctx, {})
        cost = float(row["mean_cost"])
        if row["planner"] not in best or cost < float(best[row["planner"]]["mean_cost"]):
            best[row["planner"]] = row
    out = [
        [
            "system",
            "customer",
            "alpha",
            "load",
            "planner",
            "best_cell",
            "params",
            "mean_cost",
            "service_level",
            "pct_vs_mrp",
        ]
    ]
    for ctx in sorted(contexts):
        best = contexts[ctx]
        base = float(best["mrp"]["mean_cost"]) if "mrp" in best else None
        for kind in ("mrp", "det", "stoch"):
            if kind not in best:
                continue
            row = best[kind]
            params = f"lt={row['lead_time']} ss={row['ss_mult']}"
            if kind == "mrp":
                params += f" lot={row['lot']}"
            if kind == "stoch":
                params += f" scen={row['n_scenarios']} commit={row['t_tilde']}"
            cost = float(row["mean_cost"])
            pct = "" if base in (None, 0.0) else repr(100.0 * (cost - base) / base)
            out.append(
                [
                    *ctx,
                    kind,
                    row["cell_id"],
                    params,
                    repr(cost),
                    row["service_level"],
                    pct,
                ]
            )
    return out


def report_scenarios(cells: list[dict]) -> list[list]:
    """Cost and solve effort by scenario count and commitment window."""
    groups: dict[tuple[int, int], list[dict]] = {}
    for row in cells:
        if row["planner"] != "stoch":
            continue
        key = (int(row["n_scenarios"]), int(row["t_tilde"]))
        groups.setdefault(key, []).append(row)
    out = [["n_scenarios", "t_tilde", "n_cells", "mean_cost", "best_cost", "wall_s_per_solve"]]
    for key in sorted(groups):
        rows = groups[key]
        costs = [float(r["mean_cost"]) for r in rows]
        calls = sum(int(r["solver_calls"]) for r in rows)
        wall = sum(float(r["solver_wall_s"]) for r in rows)
        out.append(
            [
                key[0],
                key[1],
                len(rows),
                repr(float(np.mean(costs))),
                repr(float(np.min(costs))),
                repr(wall / calls) if calls else "",
            ]
        )
    return out


def format_table(rows: list[list]) -> str:
    if not rows:
        return ""
    text = [[str(v) for v in row] for row in rows]
    widths = [max(len(r[j]) for r in text) for j in range(len(text[0]))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in text]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)
