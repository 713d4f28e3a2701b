"""Command line front end.

Exit codes: 0 success, 2 configuration problems, 3 failed validation,
4 solver failure during a run.
"""
from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from .configio import BUNDLED_SYSTEMS, ConfigError, load_system, read_toml, resolve_system_path
from .harness import (
    RunConfig,
    cell_id,
    config_from_dict,
    format_table,
    load_grid,
    read_cells_csv,
    report_scenarios,
    report_table,
    run_single,
    run_sweep,
)
from .planners import PlannerError
from .system import planned_shop_load, validate_system

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVALID = 3
EXIT_SOLVER = 4


def results_root() -> Path:
    return Path(os.environ.get("ROLLPLAN_RESULTS", "results"))


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@click.group()
@click.option("--verbose", is_flag=True, help="Chatty logging on stderr.")
def main(verbose: bool) -> None:
    """Rolling-horizon production planning testbed."""
    _setup_logging(verbose)


@main.command()
@click.option("--system", "systems", multiple=True, help="Bundled name or TOML path; default: all bundled.")
def validate(systems: tuple[str, ...]) -> None:
    """Check system configurations and print their planned shop load."""
    names = list(systems) or list(BUNDLED_SYSTEMS)
    bad = False
    for name in names:
        try:
            system = load_system(resolve_system_path(name))
        except ConfigError as exc:
            click.echo(f"{name}: unreadable ({exc})")
            sys.exit(EXIT_CONFIG)
        report = validate_system(system)
        if report.ok:
            click.echo(f"{name}: ok ({len(system.items)} items, {len(system.resources)} resources)")
            for label in sorted(system.load_presets, key=float):
                loads = planned_shop_load(system.with_load(label))
                shown = ", ".join(f"{k}={v:.4f}" for k, v in sorted(loads.items()))
                click.echo(f"  load {label}: {shown}")
        else:
            bad = True
            click.echo(f"{name}: INVALID")
            for violation in report.violations:
                click.echo(f"  - {violation}")
    sys.exit(EXIT_INVALID if bad else EXIT_OK)


_run_options = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="TOML with a [run] table; flags override it."),
    click.option("--system", default=None, help="Bundled system name or TOML path."),
    click.option("--load", default=None, help="Shop load preset label, e.g. 95."),
    click.option("--customer", type=click.Choice(["a", "b", "c"]), default=None),
    click.option("--alpha", type=float, default=None, help="Forecast update spread multiplier."),
    click.option("--planner", type=click.Choice(["mrp", "det", "stoch"]), default=None),
    click.option("--lead-time", type=int, default=None),
    click.option("--ss-mult", type=float, default=None, help="Safety stock in mean periods of demand."),
    click.option("--lot", default=None, help="MRP lot policy, fop:<periods> or foq:<multiplier>."),
    click.option("--scenarios", "n_scenarios", type=int, default=None, help="Scenario count for the stochastic planner."),
    click.option("--t-tilde", type=int, default=None, help="Commitment window of the stochastic planner."),
    click.option("--periods", type=int, default=None),
    click.option("--warmup", type=int, default=None),
    click.option("--replications", type=int, default=None),
    click.option("--seed", "base_seed", type=int, default=None),
    click.option("--setup-cov", type=float, default=None, help="Override setup time variation for all resources."),
    click.option("--mip-gap", type=float, default=None),
    click.option("--mip-time-limit", "mip_time_limit_s", type=float, default=None),
    click.option("--mip-node-limit", type=int, default=None),
    click.option("--demand-replay", type=click.Path(exists=True, dir_okay=False), default=None, help="Demand CSV from an earlier run to replay."),
    click.option("--dump-mrp-tableau", is_flag=True, default=False),
    click.option("--dump-solutions", is_flag=True, default=False),
]


def _apply_run_options(fn):
    for option in reversed(_run_options):
        fn = option(fn)
    return fn


@main.command()
@_apply_run_options
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory; default under the results root.")
def run(config_path: str | None, out: str | None, **flags) -> None:
    """Run one configuration (all replications) and write traces."""
    data: dict = {}
    if config_path is not None:
        parsed = read_toml(Path(config_path))
        data.update(parsed.get("run", parsed))
    for key, value in flags.items():
        if value is None:
            continue
        if key in ("dump_mrp_tableau", "dump_solutions") and not value:
            continue
        data[key] = value
    try:
        config = config_from_dict(data)
        out_dir = Path(out) if out else results_root() / "runs" / cell_id(config)
        summary = run_single(config, out_dir)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except PlannerError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    click.echo(f"cell {summary['cell_id']} -> {out_dir}")
    click.echo(
        "mean_cost={:.3f} service_level={:.4f} mean_tardy={:.3f} wall_s={:.1f}".format(
            summary["mean_cost"],
            summary["service_level"],
            summary["mean_tardy"],
            summary["wall_s"],
        )
    )
    sys.exit(EXIT_OK)


@main.command()
@click.option("--grid", "grid_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Sweep grid TOML.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Results root; default $ROLLPLAN_RESULTS or ./results.")
@click.option("--workers", type=int, default=1)
@click.option("--resume", is_flag=True, default=False, help="Skip cells whose outputs already exist.")
@click.option("--dry-run", is_flag=True, default=False, help="Print the grid cardinality and stop.")
def sweep(grid_path: str, out: str | None, workers: int, resume: bool, dry_run: bool) -> None:
    """Run a parameter sweep from a grid file."""
    try:
        grid = load_grid(grid_path)
        meta = run_sweep(
            grid,
            Path(out) if out else results_root() / "sweeps",
            workers=workers,
            resume=resume,
            dry_run=dry_run,
        )
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except PlannerError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    for kind, count in sorted(meta["cardinality"].items()):
        click.echo(f"{kind}: {count} cells")
    if not dry_run:
        click.echo(f"sweep {meta['sweep_id']} finished in {meta['wall_s']:.1f}s")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--cells", "cells_path", type=click.Path(exists=True, dir_okay=False), required=True, help="cells.csv from a sweep.")
@click.option("--kind", type=click.Choice(["table", "scenarios"]), default="table")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write CSV here instead of printing.")
def report(cells_path: str, kind: str, out: str | None) -> None:
    """Summarize a sweep: best settings per context, or scenario sizing."""
    try:
        cells = read_cells_csv(cells_path)
        rows = report_table(cells) if kind == "table" else report_scenarios(cells)
    except (KeyError, ValueError) as exc:
        click.echo(f"configuration error: malformed cells file ({exc})", err=True)
        sys.exit(EXIT_CONFIG)
    if out:
        import csv as _csv

        with open(out, "w", newline="") as fh:
            _csv.writer(fh).writerows(rows)
        click.echo(f"wrote {out}")
    else:
        click.echo(format_table(rows))
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
