"""End-to-end run: catalog -> RESI -> alarms -> baselines -> evaluation -> files."""

from __future__ import annotations

import csv
import glob
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from resi import alarms, baselines, evaluation
from resi.catalog import (JMA_COLUMNS, CatalogFilter, ColumnMap, EventTable, filter_events,
                          read_catalog, read_csv)
from resi.clustering import dump_geojson, make_clusters, to_geojson
from resi.entropy import aggregate_series, resi_series
from resi.grid import (GridError, GridSpec, Region, add_months, bin_events, cell_grid,
                       cell_shape, make_windows, quaking_meshes, window_index)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

SERIES_HEADER = ("cell_id", "window_start", "h", "hr", "hr_avr", "p_s", "no_data")
ALARM_HEADER = ("cell_id", "window_start", "hr", "hr_avr", "hr_sat", "activity",
                "high_hr", "high_activity")
BASELINE_HEADER = ("cell_id", "window_start", "pi", "ri", "high_pi", "high_ri")
UNIVERSE_HEADER = ("window_start", "hr_universe", "quakes")


class InputError(Exception):
    exit_code = 1


class ConfigError(Exception):
    exit_code = 2

    def __init__(self, problems):
        self.problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("; ".join(self.problems))


class InvariantError(Exception):
    exit_code = 3


@dataclass
class RunConfig:
    """Everything a run needs. Defaults reproduce the published setup."""

    catalogs: list = field(default_factory=list)
    csv_inputs: list = field(default_factory=list)
    columns: ColumnMap = JMA_COLUMNS
    universe: Region = Region(25.0, 125.0, 24.0, 24.0)
    cell_len: float = 4.0
    mesh: float = 0.1
    window: str = "month"
    m0: float = 2.0
    theta_m: int = 1
    log_base: float = math.e
    t_start: datetime = datetime(1983, 1, 1)
    t_end: datetime = datetime(2017, 4, 1)  # exclusive
    alarm: alarms.AlarmConfig = alarms.AlarmConfig()
    pi: baselines.PiConfig = baselines.PiConfig()
    ri: baselines.RiConfig = baselines.RiConfig()
    delta_ts: tuple = evaluation.DELTA_TS
    shared_start: datetime | None = None
    out_dir: Path = Path("out")
    write_csv: bool = True
    write_report: bool = True
    geojson_windows: list = field(default_factory=list)
    plots: bool = False

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.mesh, self.mesh, self.theta_m, self.m0)

    def validate(self) -> None:
        problems = []
        if self.window not in ("month", "year"):
            problems.append(f"window must be 'month' or 'year', got {self.window!r}")
        if self.mesh <= 0 or self.cell_len <= 0:
            problems.append("mesh and cell sizes must be positive")
        else:
            for what, length, step in (("cell", self.cell_len, self.mesh),
                                       ("universe height", self.universe.x_len, self.cell_len),
                                       ("universe width", self.universe.y_len, self.cell_len)):
                k = length / step
                if abs(k - round(k)) > 1e-6:
                    problems.append(f"{step:g} does not divide the {what} ({length:g})")
        if self.theta_m < 0:
            problems.append("theta_m must be >= 0")
        if not self.log_base > 1:
            problems.append("log_base must exceed 1")
        if not self.t_start < self.t_end:
            problems.append("period start must precede its end")
        if self.t_start.day != 1 or self.t_end.day != 1:
            problems.append("period bounds must be first days of months")
        if any(dt < 1 or dt > 36 for dt in self.delta_ts):
            problems.append("delta_t values must lie in 1..36 months")
        for name, when in (("pi.t0", self.pi.t0), ("pi.t1", self.pi.t1), ("ri.t0", self.ri.t0)):
            if not self.t_start <= when < self.t_end:
                problems.append(f"{name} {when:%Y-%m} lies outside the period")
        if self.alarm.t0 < self.t_start:
            problems.append("alarms.t0 precedes the period start")
        if problems:
            raise ConfigError(problems)

    def check_writable(self) -> None:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise ConfigError(f"output directory {self.out_dir} is not writable ({err})") from None
        if not os.access(self.out_dir, os.W_OK):
            raise ConfigError(f"output directory {self.out_dir} is not writable")


# --------------------------------------------------------------------------
# config files


def _month(text, key: str) -> datetime:
    if isinstance(text, datetime):
        return text
    try:
        parts = [int(p) for p in str(text).split("-")]
        return datetime(parts[0], parts[1] if len(parts) > 1 else 1, parts[2] if len(parts) > 2 else 1)
    except (ValueError, IndexError):
        raise ConfigError(f"{key}: expected YYYY-MM, got {text!r}") from None


def parse_universe(text) -> Region:
    """``"lat0,lon0,lat1,lon1"`` or a 4-list -> Region."""
    vals = text if isinstance(text, (list, tuple)) else str(text).split(",")
    try:
        lat0, lon0, lat1, lon1 = (float(v) for v in vals)
        return Region.from_corners(lat0, lon0, lat1, lon1)
    except (ValueError, TypeError):
        raise ConfigError(f"universe: expected lat0,lon0,lat1,lon1, got {text!r}") from None


_KNOWN = {
    "input": {"catalogs", "csv", "columns"},
    "grid": {"universe", "cell", "mesh", "window", "m0", "theta_m"},
    "entropy": {"log_base"},
    "period": {"start", "end"},
    "alarms": {"T", "dt", "gamma", "theta_std", "t0", "warmup", "rank_unit", "min_points"},
    "baselines": {"pi_t0", "pi_t1", "pi_cutoff", "tb_step", "ri_t0", "ri_cutoff"},
    "evaluation": {"delta_t", "shared_start"},
    "output": {"dir", "csv", "report", "geojson_windows", "plots"},
    "synthetic": None,  # read by the scenario loader
}


def config_from_dict(d: dict, base: RunConfig | None = None, root: Path | None = None) -> RunConfig:
    """Build a RunConfig from parsed TOML; every problem is reported at once."""
    cfg = base or RunConfig()
    problems = []
    for sec, keys in d.items():
        if sec not in _KNOWN:
            problems.append(f"unknown section [{sec}]")
        elif keys is not None and _KNOWN[sec] is not None:
            problems += [f"unknown key {sec}.{k}" for k in keys if k not in _KNOWN[sec]]
    if problems:
        raise ConfigError(problems)

    def rel(p):
        p = Path(p)
        return p if p.is_absolute() or root is None else root / p

    kw: dict = {}
    inp, grid, per = d.get("input", {}), d.get("grid", {}), d.get("period", {})
    try:
        if "catalogs" in inp:
            kw["catalogs"] = [str(rel(p)) for p in inp["catalogs"]]
        if "csv" in inp:
            kw["csv_inputs"] = [str(rel(p)) for p in inp["csv"]]
        if "columns" in inp:
            kw["columns"] = replace(cfg.columns, **{k: tuple(v) if isinstance(v, list) else v
                                                    for k, v in inp["columns"].items()})
        if "universe" in grid:
            kw["universe"] = parse_universe(grid["universe"])
        for src, dst, typ in (("cell", "cell_len", float), ("mesh", "mesh", float),
                              ("window", "window", str), ("m0", "m0", float),
                              ("theta_m", "theta_m", int)):
            if src in grid:
                kw[dst] = typ(grid[src])
        base_txt = d.get("entropy", {}).get("log_base")
        if base_txt is not None:
            kw["log_base"] = math.e if base_txt in ("e", "E") else float(base_txt)
        if "start" in per:
            kw["t_start"] = _month(per["start"], "period.start")
        if "end" in per:
            kw["t_end"] = _month(per["end"], "period.end")

        a = dict(d.get("alarms", {}))
        if "t0" in a:
            a["t0"] = _month(a["t0"], "alarms.t0")
        elif "t_start" in kw:
            a["t0"] = kw["t_start"]
        kw["alarm"] = replace(cfg.alarm, **a)

        b = d.get("baselines", {})
        pi_kw = {"t0": _month(b["pi_t0"], "baselines.pi_t0")} if "pi_t0" in b else {}
        if "pi_t1" in b:
            pi_kw["t1"] = _month(b["pi_t1"], "baselines.pi_t1")
        if "pi_cutoff" in b:
            pi_kw["cutoff"] = float(b["pi_cutoff"])
        if "tb_step" in b:
            pi_kw["tb_step"] = int(b["tb_step"])
        kw["pi"] = replace(cfg.pi, **pi_kw)
        ri_kw = {"t0": _month(b["ri_t0"], "baselines.ri_t0")} if "ri_t0" in b else {}
        if "ri_cutoff" in b:
            ri_kw["cutoff"] = float(b["ri_cutoff"])
        kw["ri"] = replace(cfg.ri, **ri_kw)

        ev = d.get("evaluation", {})
        if "delta_t" in ev:
            kw["delta_ts"] = tuple(int(x) for x in ev["delta_t"])
        if ev.get("shared_start"):
            kw["shared_start"] = _month(ev["shared_start"], "evaluation.shared_start")

        out = d.get("output", {})
        if "dir" in out:
            kw["out_dir"] = rel(out["dir"])
        for src, dst in (("csv", "write_csv"), ("report", "write_report"), ("plots", "plots")):
            if src in out:
                kw[dst] = bool(out[src])
        if "geojson_windows" in out:
            kw["geojson_windows"] = [_month(w, "output.geojson_windows") for w in out["geojson_windows"]]
    except (TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from None
    return replace(cfg, **kw)


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    return config_from_dict(load_toml(path), base, Path(path).parent)


# --------------------------------------------------------------------------
# loading events


def expand_inputs(patterns) -> list[str]:
    out = []
    for pat in patterns:
        hits = sorted(glob.glob(str(pat)))
        if not hits:
            raise InputError(f"no input matches {pat}")
        out += hits
    return out


def load_events(cfg: RunConfig) -> EventTable:
    if not cfg.catalogs and not cfg.csv_inputs:
        raise InputError("no input catalog given")
    tables = []
    if cfg.catalogs:
        res = read_catalog(expand_inputs(cfg.catalogs), cfg.columns)
        log.info("parsed %d records, rejected %d", len(res.events), res.n_rejected)
        tables.append(EventTable.from_events(res.events))
    for p in expand_inputs(cfg.csv_inputs):
        try:
            tables.append(read_csv(p))
        except (KeyError, ValueError) as err:
            raise InputError(f"{p}: not a normalized event CSV ({err})") from None
    return EventTable.stack(tables)


# --------------------------------------------------------------------------
# the run


@dataclass
class RunResult:
    cfg: RunConfig
    windows: list
    cells: list
    series: list            # per cell: list[ResiPoint]
    hr_sat: np.ndarray      # (n_cells, n_t)
    activity: np.ndarray    # (n_cells, n_t), NaN when empty
    high_hr: np.ndarray
    high_act: np.ndarray
    counts: np.ndarray      # (n_cells, n_t) events with M >= m0
    pi: np.ndarray | None = None
    ri: np.ndarray | None = None
    high_pi: np.ndarray | None = None
    high_ri: np.ndarray | None = None
    report: evaluation.EvalReport | None = None
    universe_hr: list = field(default_factory=list)
    events: EventTable | None = None
    timings: dict = field(default_factory=dict)

    @property
    def starts(self) -> list[datetime]:
        return [w.start for w in self.windows]


def _cell_counts(events: EventTable, cells, windows, cutoff: float) -> np.ndarray:
    """Per cell, per window count of events with magnitude >= cutoff."""
    keep = events.mag >= cutoff - 1e-9
    widx = window_index(events.time[keep], windows)
    lat, lon = events.lat[keep], events.lon[keep]
    out = np.zeros((len(cells), len(windows)), dtype=np.int64)
    for c, cell in enumerate(cells):
        m = cell.contains_array(lat, lon) & (widx >= 0)
        out[c] = np.bincount(widx[m], minlength=len(windows))
    return out


def _cell_activity(events: EventTable, cells, windows, m0: float) -> np.ndarray:
    keep = events.mag >= m0 - 1e-9
    widx = window_index(events.time[keep], windows)
    lat, lon, mag = events.lat[keep], events.lon[keep], events.mag[keep]
    out = np.full((len(cells), len(windows)), np.nan)
    for c, cell in enumerate(cells):
        m = cell.contains_array(lat, lon)
        out[c] = alarms.activity_by_window(widx[m], mag[m], len(windows))
    return out


def _first_index(windows, when: datetime) -> int:
    for k, w in enumerate(windows):
        if w.start >= when:
            return k
    return len(windows)


def run_pipeline(cfg: RunConfig, events: EventTable | None = None) -> RunResult:
    """Compute every series and the evaluation report (no files written)."""
    cfg.validate()
    clock = time.perf_counter()
    timings = {}
    if events is None:
        events = load_events(cfg)
        timings["load"] = time.perf_counter() - clock
    events = filter_events(events, CatalogFilter(cfg.m0, cfg.universe, cfg.t_start, cfg.t_end))
    try:
        cells = cell_grid(cfg.universe, cfg.cell_len)
        shape = cell_shape(cfg.universe, cfg.cell_len)
    except GridError as err:
        raise ConfigError(str(err)) from None
    windows = make_windows(cfg.t_start, cfg.t_end, cfg.window)
    n_t = len(windows)
    spec = cfg.grid

    t = time.perf_counter()
    series = [resi_series(events, cell, spec, windows, cfg.universe, cell_id=c, base=cfg.log_base)
              for c, cell in enumerate(cells)]
    timings["resi"] = time.perf_counter() - t

    t = time.perf_counter()
    sat = np.array([alarms.hr_sat_series(s, cfg.alarm) for s in series]).reshape(len(cells), n_t)
    act = _cell_activity(events, cells, windows, cfg.m0)
    lookback = 24 if cfg.window == "month" else 2
    high_hr = (sat > 0).astype(np.int64)
    high_act = np.array([alarms.high_activity(list(a), lookback) for a in act],
                        dtype=np.int64).reshape(len(cells), n_t)
    counts = _cell_counts(events, cells, windows, cfg.m0)
    timings["alarms"] = time.perf_counter() - t

    for s in series:
        for p in s:
            if not p.no_data and not (0.0 <= p.p_s <= 1.0 + 1e-12 and p.h >= -1e-12):
                raise InvariantError(f"cell {p.cell_id} {p.window_start:%Y-%m}: p_s={p.p_s}, h={p.h}")

    res = RunResult(cfg, windows, cells, series, sat, act, high_hr, high_act, counts,
                    universe_hr=aggregate_series(series), events=events, timings=timings)

    if cfg.window == "month":
        t = time.perf_counter()
        _baselines_and_eval(res, events, shape)
        timings["baselines+eval"] = time.perf_counter() - t
    else:
        log.info("yearly windows: baselines and evaluation are defined on months only; skipped")
    timings["total"] = time.perf_counter() - clock
    return res


def _baselines_and_eval(res: RunResult, events: EventTable, shape) -> None:
    cfg, windows, n_t = res.cfg, res.windows, len(res.windows)
    axis = res.starts
    pi_counts = _cell_counts(events, res.cells, windows, cfg.pi.cutoff)
    ri_counts = _cell_counts(events, res.cells, windows, cfg.ri.cutoff)
    res.pi = baselines.pi_series(pi_counts, cfg.pi, axis)
    res.ri = baselines.ri_series(ri_counts, cfg.ri, axis, shape)

    s_hr = _first_index(windows, add_months(cfg.alarm.t0, round(cfg.alarm.warmup * 12)))
    s_pi = _first_index(windows, cfg.pi.t1)
    s_ri = _first_index(windows, cfg.ri.t0)
    t_hr = max(n_t - s_hr, 1)
    res.high_pi = np.zeros((len(res.cells), n_t), dtype=np.int64)
    res.high_ri = np.zeros_like(res.high_pi)
    for c in range(len(res.cells)):
        m = int(res.high_hr[c, s_hr:].sum())
        for arr, high in ((res.pi, res.high_pi), (res.ri, res.high_ri)):
            t_f = int(np.count_nonzero(~np.isnan(arr[c])))
            if t_f:
                high[c] = baselines.high_topn(arr[c], m, t_f, t_hr)

    shared = None if cfg.shared_start is None else _first_index(windows, cfg.shared_start)
    res.report = evaluation.evaluate_all(
        {"hr_sat": res.high_hr, "pi": res.high_pi, "ri": res.high_ri},
        res.high_act, res.counts, {"hr_sat": s_hr, "pi": s_pi, "ri": s_ri},
        cfg.delta_ts, shared)


# --------------------------------------------------------------------------
# exports


def _num(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _stamp(w: datetime) -> str:
    return f"{w:%Y-%m}"


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_outputs(res: RunResult) -> list[Path]:
    """Write the CSV/JSON/GeoJSON (and optional SVG) artifacts; returns the paths."""
    cfg = res.cfg
    cfg.check_writable()
    out = cfg.out_dir
    written = []
    if cfg.write_csv:
        rows = [(p.cell_id, _stamp(p.window_start), _num(p.h), _num(p.hr), _num(p.hr_avr),
                 _num(p.p_s), int(p.no_data)) for s in res.series for p in s]
        _write_rows(out / "resi_series.csv", SERIES_HEADER, rows)
        rows = []
        for c, s in enumerate(res.series):
            for k, p in enumerate(s):
                rows.append((c, _stamp(p.window_start), _num(p.hr), _num(p.hr_avr),
                             _num(res.hr_sat[c, k]), _num(res.activity[c, k]),
                             int(res.high_hr[c, k]), int(res.high_act[c, k])))
        _write_rows(out / "alarms.csv", ALARM_HEADER, rows)
        written += [out / "resi_series.csv", out / "alarms.csv"]
        if res.pi is not None:
            rows = [(c, _stamp(w), _num(res.pi[c, k]), _num(res.ri[c, k]),
                     int(res.high_pi[c, k]), int(res.high_ri[c, k]))
                    for c in range(len(res.cells)) for k, w in enumerate(res.starts)]
            _write_rows(out / "baselines.csv", BASELINE_HEADER, rows)
            written.append(out / "baselines.csv")
        tot = res.counts.sum(axis=0)
        rows = [(_stamp(w), _num(h), int(n)) for w, h, n in zip(res.starts, res.universe_hr, tot)]
        _write_rows(out / "universe.csv", UNIVERSE_HEADER, rows)
        written.append(out / "universe.csv")
    meta = {"universe": list(cfg.universe.corners()), "cell_len": cfg.cell_len, "mesh": cfg.mesh,
            "cell_shape": list(cell_shape(cfg.universe, cfg.cell_len)), "window": cfg.window,
            "period": [f"{cfg.t_start:%Y-%m}", f"{cfg.t_end:%Y-%m}"]}
    (out / "run_meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    written.append(out / "run_meta.json")
    if cfg.write_report and res.report is not None:
        (out / "report.json").write_text(res.report.to_json())
        written.append(out / "report.json")
    if cfg.geojson_windows:
        written += write_geojson(res, cfg.geojson_windows)
    if cfg.plots:
        from resi import plots
        written += plots.plot_run(out)
    return written


def write_geojson(res: RunResult, when: list) -> list[Path]:
    """One FeatureCollection per requested window, clusters of every cell."""
    out = res.cfg.out_dir / "clusters"
    out.mkdir(parents=True, exist_ok=True)
    by_start = {w.start: w for w in res.windows}
    written = []
    for w in when:
        if w not in by_start:
            raise InputError(f"window {w:%Y-%m} is not in the run period")
        feats = []
        for c, cell in enumerate(res.cells):
            counts = bin_events(res.events, cell, res.cfg.grid, [by_start[w]], res.cfg.universe)[0]
            part = make_clusters(quaking_meshes(counts, res.cfg.grid))
            fc = to_geojson(part, cell, res.cfg.grid, counts)
            for f in fc["features"]:
                f["properties"]["cell_id"] = c
            feats += fc["features"]
        path = out / f"clusters_{w:%Y-%m}.geojson"
        dump_geojson({"type": "FeatureCollection", "features": feats}, path)
        written.append(path)
    return written
