"""SVG views of a finished run. Everything here reads the exported files only."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed ids and no timestamp, so reruns give identical bytes
matplotlib.rcParams["svg.hashsalt"] = "resi"
_META = {"Date": None, "Creator": "resi"}

HR_COLOR = "tab:green"
SAT_COLOR = "tab:blue"
ACT_COLOR = "tab:orange"


def _float(text: str) -> float:
    return float(text) if text else math.nan


def read_alarms(path) -> dict:
    """cell id -> {"t": [...], "hr": [...], "hr_sat": [...], "activity": [...]}."""
    out: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            d = out.setdefault(int(row["cell_id"]), {"t": [], "hr": [], "hr_sat": [], "activity": []})
            d["t"].append(row["window_start"])
            d["hr"].append(_float(row["hr"]))
            d["hr_sat"].append(_float(row["hr_sat"]))
            d["activity"].append(_float(row["activity"]))
    return out


def _decimal_years(stamps) -> list[float]:
    out = []
    for s in stamps:
        parts = s.split("-")
        out.append(int(parts[0]) + (int(parts[1]) - 1) / 12 if len(parts) > 1 else float(parts[0]))
    return out


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_cell(cell: int, d: dict, path: Path) -> Path:
    """Hr (green), Hr_sat (blue) and activity (orange, right axis) for one cell."""
    x = _decimal_years(d["t"])
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(x, d["hr"], color=HR_COLOR, lw=0.8, label="Hr")
    ax.plot(x, d["hr_sat"], color=SAT_COLOR, lw=0.8, label="Hr_sat")
    ax.set_ylabel("Hr (nats)")
    ax2 = ax.twinx()
    ax2.plot(x, d["activity"], color=ACT_COLOR, lw=0.6, label="activity")
    ax2.set_ylabel("activity")
    ax.set_title(f"cell {cell}")
    ax.set_xlabel("year")
    fig.tight_layout()
    return _save(fig, path)


def plot_condition_map(report: dict, shape: tuple[int, int], fn: str, dt: int, path: Path) -> Path:
    """Cell grid with active cells shaded and a red dot per satisfied condition.

    Row 0 (the southern row) is drawn at the bottom. Condition A sits on the
    left of the cell, condition B on the right.
    """
    n_rows, n_cols = shape
    active = set(report.get("active_cells", []))
    fig, ax = plt.subplots(figsize=(n_cols * 0.6 + 1, n_rows * 0.6 + 1))
    for cid in range(n_rows * n_cols):
        r, c = divmod(cid, n_cols)
        ax.add_patch(plt.Rectangle((c, r), 1, 1, facecolor="0.85" if cid in active else "white",
                                   edgecolor="0.5", lw=0.5))
        s = report["cells"].get(str(cid), {}).get(fn, {}).get(str(dt))
        if not s:
            continue
        if s.get("condition_a"):
            ax.plot(c + 0.3, r + 0.5, "o", color="red", ms=5)
        if s.get("condition_b"):
            ax.plot(c + 0.7, r + 0.5, "o", color="red", ms=5)
    ax.set_xlim(0, n_cols)
    ax.set_ylim(0, n_rows)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    ax.set_title(f"{fn}, dt={dt}")
    fig.tight_layout()
    return _save(fig, path)


def plot_universe(path_csv, path: Path) -> Path:
    with open(path_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    x = _decimal_years([r["window_start"] for r in rows])
    fig, ax = plt.subplots(figsize=(9, 3))
    ax.plot(x, [_float(r["hr_universe"]) for r in rows], color=HR_COLOR, lw=0.8)
    ax.set_ylabel("Hr of the universe (nats)")
    ax.set_xlabel("year")
    fig.tight_layout()
    return _save(fig, path)


def plot_run(out_dir, cells: list[int] | None = None) -> list[Path]:
    """Render every view available from the files in ``out_dir``."""
    out_dir = Path(out_dir)
    plot_dir = out_dir / "plots"
    plot_dir.mkdir(exist_ok=True)
    written = []
    alarms_csv = out_dir / "alarms.csv"
    if alarms_csv.exists():
        per_cell = read_alarms(alarms_csv)
        for c in sorted(per_cell):
            if cells is None or c in cells:
                written.append(plot_cell(c, per_cell[c], plot_dir / f"cell_{c:02d}.svg"))
    if (out_dir / "universe.csv").exists():
        written.append(plot_universe(out_dir / "universe.csv", plot_dir / "universe.svg"))
    meta_path, report_path = out_dir / "run_meta.json", out_dir / "report.json"
    if report_path.exists() and meta_path.exists():
        report = json.loads(report_path.read_text())
        shape = tuple(json.loads(meta_path.read_text())["cell_shape"])
        fns = sorted(next(iter(report["cells"].values()), {}))
        for fn in fns:
            for dt in report["delta_t"]:
                written.append(plot_condition_map(report, shape, fn, dt,
                                                  plot_dir / f"conditions_{fn}_dt{dt}.svg"))
    return written
