"""``resi`` command line: parse, run, eval, synth and plot.

Exit codes: 0 success, 1 input error, 2 config error, 3 invariant violation.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from resi.catalog import EventTable, read_catalog, write_csv, write_records
from resi.pipeline import (ConfigError, InputError, InvariantError, RunConfig, _month,
                           config_from_dict, expand_inputs, load_config, load_toml,
                           parse_universe, run_pipeline, write_outputs)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Regional entropy of seismic information (RESI) toolkit."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.argument("files", nargs=-1, required=True)
@click.option("-o", "--out", "out", default="-", help="CSV path, '-' for stdout.")
@click.option("--config", "config", default=None, help="TOML with an [input.columns] override.")
def parse(files, out, config):
    """Parse JMA fixed-width FILES into the normalized event CSV."""
    cfg = load_config(config) if config else RunConfig()
    res = read_catalog(expand_inputs(files), cfg.columns)
    table = EventTable.from_events(res.events).sorted()
    if out == "-":
        write_csv(table, sys.stdout)
    else:
        write_csv(table, out)
    click.echo(f"{len(res.events)} events, {res.n_rejected} rejected of {res.n_lines} lines", err=True)
    for src, line_no, reason in res.rejects[:20]:
        click.echo(f"  {src}:{line_no}: {reason}", err=True)


@cli.command()
@click.argument("inputs", nargs=-1)
@click.option("--config", "config", default=None, help="Run configuration (TOML).")
@click.option("--catalog", "catalogs", multiple=True, help="JMA fixed-width file or glob.")
@click.option("--csv", "csvs", multiple=True, help="Normalized event CSV.")
@click.option("--synthetic", default=None, help="Scenario TOML with a [synthetic] table.")
@click.option("--out", "out_dir", default=None, help="Output directory.")
@click.option("--window", type=click.Choice(["month", "year"]), default=None)
@click.option("--mesh", type=float, default=None, help="Mesh size, degrees.")
@click.option("--cell", type=float, default=None, help="Cell size, degrees.")
@click.option("--m0", type=float, default=None, help="Magnitude cutoff.")
@click.option("--theta-m", "theta_m", type=int, default=None, help="Quaking-mesh count threshold.")
@click.option("--universe", default=None, help="lat0,lon0,lat1,lon1")
@click.option("--rank-unit", type=click.Choice(["years", "samples"]), default=None)
@click.option("--shared-start", default=None, help="Score every function from YYYY-MM.")
@click.option("--geojson", "geojson", multiple=True, help="Export cluster snapshots for YYYY-MM.")
@click.option("--plots/--no-plots", default=None)
def run(inputs, config, catalogs, csvs, synthetic, out_dir, window, mesh, cell, m0, theta_m,
        universe, rank_unit, shared_start, geojson, plots):
    """Run the whole pipeline and write the artifacts.

    Extra positional INPUTS are treated as more catalog files, so that
    ``--catalog hypo/*.txt`` works after shell expansion.
    """
    events = None
    if synthetic:
        from resi.synth import events_from_dict

        doc = load_toml(synthetic)
        if "synthetic" not in doc:
            raise ConfigError(f"{synthetic} has no [synthetic] table")
        try:
            events, uni, t0, t_end = events_from_dict(doc["synthetic"])
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"[synthetic]: {err}") from None
        base = replace(RunConfig(), universe=uni, t_start=t0, t_end=t_end)
        base = replace(base, alarm=replace(base.alarm, t0=t0))
        cfg = config_from_dict(doc, base, Path(synthetic).parent)
    else:
        cfg = load_config(config) if config else RunConfig()
    if synthetic and config:
        cfg = load_config(config, cfg)

    kw = {}
    if catalogs or inputs:
        kw["catalogs"] = list(catalogs) + list(inputs)
    if csvs:
        kw["csv_inputs"] = list(csvs)
    for key, val in (("window", window), ("mesh", mesh), ("cell_len", cell), ("m0", m0),
                     ("theta_m", theta_m), ("plots", plots)):
        if val is not None:
            kw[key] = val
    if out_dir:
        kw["out_dir"] = Path(out_dir)
    if universe:
        kw["universe"] = parse_universe(universe)
    if shared_start:
        kw["shared_start"] = _month(shared_start, "--shared-start")
    if geojson:
        kw["geojson_windows"] = [_month(g, "--geojson") for g in geojson]
    cfg = replace(cfg, **kw)
    if rank_unit:
        cfg = replace(cfg, alarm=replace(cfg.alarm, rank_unit=rank_unit))
    cfg.validate()
    cfg.check_writable()

    res = run_pipeline(cfg, events)
    paths = write_outputs(res)
    n_active = sum(res.report.active) if res.report else 0
    click.echo(f"{len(res.cells)} cells x {len(res.windows)} windows, {n_active} active cells; "
               f"wrote {len(paths)} files to {cfg.out_dir}", err=True)


@cli.command("eval")
@click.option("--report", "report_path", required=True, help="report.json from a run.")
@click.option("--dt", "dts", type=int, multiple=True, help="Delta t in months (repeatable).")
@click.option("--active-only/--all-cells", default=True)
def eval_cmd(report_path, dts, active_only):
    """Print how many cells satisfy Conditions A and B."""
    from resi.evaluation import EvalReport

    try:
        with open(report_path) as fh:
            report = EvalReport.from_dict(json.load(fh))
    except FileNotFoundError:
        raise InputError(f"report {report_path} not found") from None
    except (KeyError, ValueError) as err:
        raise InputError(f"{report_path} is not a run report ({err})") from None
    dts = dts or report.delta_ts
    missing = [dt for dt in dts if dt not in report.delta_ts]
    if missing:
        raise ConfigError(f"delta_t {missing} not in the report (has {list(report.delta_ts)})")
    summary = report.summary(active_only=active_only)
    scope = f"{sum(report.active)} active cells" if active_only else f"{len(report.scores)} cells"
    click.echo(f"cells satisfying each condition ({scope})")
    click.echo(f"{'function':<10}{'dt':>4}{'A':>6}{'B':>6}")
    for fn in report.functions:
        for dt in dts:
            s = summary[fn][dt]
            click.echo(f"{fn:<10}{dt:>4}{s['condition_a']:>6}{s['condition_b']:>6}")


@cli.command()
@click.argument("scenario")
@click.option("-o", "--out", "out", required=True, help="Output file.")
@click.option("--format", "fmt", type=click.Choice(["jma", "csv"]), default="jma")
def synth(scenario, out, fmt):
    """Generate a synthetic catalog from a SCENARIO TOML."""
    from resi.synth import events_from_dict

    doc = load_toml(scenario)
    if "synthetic" not in doc:
        raise ConfigError(f"{scenario} has no [synthetic] table")
    try:
        events = events_from_dict(doc["synthetic"])[0]
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"[synthetic]: {err}") from None
    if fmt == "jma":
        write_records(events, out)
    else:
        write_csv(events, out)
    click.echo(f"{len(events)} events written to {out}", err=True)


@cli.command()
@click.argument("out_dir")
@click.option("--cell", "cells", type=int, multiple=True, help="Only these cells.")
def plot(out_dir, cells):
    """Render SVG views from the CSV/JSON files of a run."""
    from resi.plots import plot_run

    if not (Path(out_dir) / "alarms.csv").exists():
        raise InputError(f"{out_dir} has no alarms.csv")
    paths = plot_run(out_dir, list(cells) or None)
    click.echo(f"wrote {len(paths)} plots", err=True)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="resi", standalone_mode=False)
    except (InputError, ConfigError, InvariantError) as err:
        click.echo(f"error: {err}", err=True)
        return err.exit_code
    except click.exceptions.Abort:
        return 1
    except click.ClickException as err:
        err.show()
        return 2
    except OSError as err:
        click.echo(f"error: {err}", err=True)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
