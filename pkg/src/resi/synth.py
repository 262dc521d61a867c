"""Synthetic catalogs: scheduled cluster transitions and random background.

Events are placed in meshes of a universe grid. Each phase of a scenario
lists the clusters that are active (as mesh sets), optional sub-threshold
bridge meshes in the gaps, and the per-mesh monthly rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from resi.catalog import EventTable
from resi.grid import GridSpec, Region, add_months

@dataclass(frozen=True)
class Phase:
    name: str
    months: int
    clusters: tuple = ()
    rate: float = 3.0
    bridge: frozenset = frozenset()
    bridge_rate: float = 0.0


@dataclass(frozen=True)
class ScenarioSpec:
    """A schedule of phases over a universe grid.

    Attributes:
        phases: contiguous phases, in order.
        background: mesh sets active in every phase at ``background_rate``.
        scatter_rate: events per month placed uniformly over the universe.
        process: ``"poisson"`` draws per-mesh counts; ``"fixed"`` uses the
            rate itself as the count every month (rates must be integers).
        b_value, mag_floor: Gutenberg-Richter magnitudes, floored to 0.1.
    """

    phases: tuple
    seed: int = 0
    t0: datetime = datetime(1983, 1, 1)
    universe: Region = Region(25.0, 125.0, 4.0, 4.0)
    grid: GridSpec = GridSpec()
    background: tuple = ()
    background_rate: float = 0.0
    scatter_rate: float = 0.0
    process: str = "poisson"
    b_value: float = 1.0
    mag_floor: float = 2.0

    def __post_init__(self):
        if self.process not in ("poisson", "fixed"):
            raise ValueError(f"unknown process {self.process!r}")
        rates = [p.rate for p in self.phases] + [p.bridge_rate for p in self.phases]
        rates += [self.background_rate, self.scatter_rate]
        if any(r < 0 for r in rates):
            raise ValueError("rates must be non-negative")
        if self.process == "fixed" and any(r != int(r) for r in rates):
            raise ValueError("fixed process needs integer rates")
        nx, ny = self.grid.shape(self.universe)
        for ph in self.phases:
            for c in tuple(ph.clusters) + (ph.bridge,):
                for i, j in c:
                    if not (0 <= i < nx and 0 <= j < ny):
                        raise ValueError(f"mesh {(i, j)} of phase {ph.name!r} is off the grid")

    @property
    def n_months(self) -> int:
        return sum(p.months for p in self.phases)

    @property
    def t_end(self) -> datetime:
        return add_months(self.t0, self.n_months)


def gr_magnitudes(rng: np.random.Generator, n: int, b_value: float = 1.0,
                  floor: float = 2.0) -> np.ndarray:
    """Gutenberg-Richter magnitudes by inverse CDF, floored to 0.1 steps."""
    u = rng.random(n)
    m = floor - np.log10(1.0 - u) / b_value
    m = np.floor(m * 10 + 1e-9) / 10
    return np.minimum(m, 9.9)


def _place(rng, meshes: np.ndarray, counts: np.ndarray, spec: ScenarioSpec,
           start: datetime, end: datetime) -> EventTable:
    reps = np.repeat(np.arange(len(meshes)), counts)
    n = len(reps)
    if n == 0:
        return EventTable.empty()
    g, u = spec.grid, spec.universe
    # keep clear of mesh edges so re-encoding to 0.01' cannot move an event
    fx = rng.uniform(0.05, 0.95, n)
    fy = rng.uniform(0.05, 0.95, n)
    lat = u.x0 + (meshes[reps, 0] + fx) * g.dx
    lon = u.y0 + (meshes[reps, 1] + fy) * g.dy
    return EventTable(_times(rng, n, start, end), lat, lon,
                      np.full(n, 10.0), gr_magnitudes(rng, n, spec.b_value, spec.mag_floor))


def _times(rng, n: int, start: datetime, end: datetime) -> np.ndarray:
    a = np.datetime64(start, "us")
    span = (np.datetime64(end, "us") - a).astype(np.int64)
    off = np.floor(rng.random(n) * span / 10_000).astype(np.int64) * 10_000
    return a + off.astype("timedelta64[us]")


def generate(spec: ScenarioSpec) -> EventTable:
    """Draw the scenario's events; the same seed gives the same stream."""
    rng = np.random.default_rng(spec.seed)
    parts = []
    bg = sorted(set().union(*spec.background)) if spec.background else []
    t = spec.t0
    for ph in spec.phases:
        meshes = [m for c in ph.clusters for m in sorted(c)]
        rates = [ph.rate] * len(meshes)
        meshes += sorted(ph.bridge)
        rates += [ph.bridge_rate] * len(ph.bridge)
        meshes += bg
        rates += [spec.background_rate] * len(bg)
        mesh_arr = np.array(meshes, dtype=np.int64).reshape(-1, 2)
        rate_arr = np.array(rates, dtype=float)
        for _ in range(ph.months):
            t_next = add_months(t, 1)
            if spec.process == "fixed":
                counts = rate_arr.astype(np.int64)
            else:
                counts = rng.poisson(rate_arr)
            parts.append(_place(rng, mesh_arr, counts, spec, t, t_next))
            if spec.scatter_rate > 0:
                n = int(spec.scatter_rate) if spec.process == "fixed" else rng.poisson(spec.scatter_rate)
                parts.append(_scatter(rng, n, spec, t, t_next))
            t = t_next
    return EventTable.stack(parts).sorted()


def _scatter(rng, n: int, spec: ScenarioSpec, start: datetime, end: datetime) -> EventTable:
    u = spec.universe
    lat = u.x0 + rng.random(n) * u.x_len
    lon = u.y0 + rng.random(n) * u.y_len
    return EventTable(_times(rng, n, start, end), lat, lon, np.full(n, 10.0),
                      gr_magnitudes(rng, n, spec.b_value, spec.mag_floor))


def designed_cluster_counts(spec: ScenarioSpec) -> list[int]:
    """Number of clusters the schedule intends in each month."""
    out = []
    for ph in spec.phases:
        out += [len(ph.clusters) + len(spec.background)] * ph.months
    return out


def phase_of_month(spec: ScenarioSpec) -> list[str]:
    return [ph.name for ph in spec.phases for _ in range(ph.months)]


# --------------------------------------------------------------------------
# ready-made scenarios


def bars(k: int, rows=(10, 11, 12), col0: int = 4, width: int = 16) -> tuple:
    """``k`` vertical-strip clusters sharing ``width`` columns, split by 1-column gaps."""
    if width % k:
        raise ValueError("k must divide width")
    run = width // k
    out = []
    for n in range(k):
        c0 = col0 + n * (run + 1)
        out.append(frozenset((r, c) for r in rows for c in range(c0, c0 + run)))
    return tuple(out)


def figure1_scenario(seed: int = 0, rate: int = 2, process: str = "fixed") -> ScenarioSpec:
    """Ramp, plateau and merge of cluster diversity in the south-west cell.

    The universe is two 4-degree cells, (25,125)-(29,133). The target cell
    (cell 0) holds 48 meshes whose grouping follows the schedule; cell 1
    holds one steady background cluster, so ``p(S,t)`` stays fixed and
    ``Hr`` moves only with the number of clusters:

    ==========  =================  ========
    phase       months             clusters
    ==========  =================  ========
    early       1983-01..1984-12   8
    merged      1985-01..1993-12   1
    ramp-2      1994-01..1994-03   2
    ramp-4      1994-04..1994-06   4
    ramp-8      1994-07..1994-09   8
    plateau     1994-10..1996-12   16
    merge       1997-01..1998-12   1
    ==========  =================  ========
    """
    schedule = [("early", 24, 8), ("merged", 108, 1), ("ramp-2", 3, 2), ("ramp-4", 3, 4),
                ("ramp-8", 3, 8), ("plateau", 27, 16), ("merge", 24, 1)]
    phases = tuple(Phase(name, months, bars(k), rate) for name, months, k in schedule)
    background = (frozenset((r, c) for r in range(20, 24) for c in range(60, 64)),)
    return ScenarioSpec(phases=phases, seed=seed, universe=Region(25.0, 125.0, 4.0, 8.0),
                        background=background, background_rate=rate, process=process)


def _disc(ci: int, cj: int, radius: float) -> frozenset:
    r = int(math.ceil(radius))
    return frozenset((ci + di, cj + dj) for di in range(-r, r + 1) for dj in range(-r, r + 1)
                     if di * di + dj * dj <= radius * radius)


def transition_scenario(seed: int = 0, rate: float = 3.0, process: str = "poisson",
                        months: tuple = (24, 24, 24, 24), bridge_rate: float = 0.1) -> ScenarioSpec:
    """States (a) -> (c) -> (d) -> (e) inside one 4-degree cell.

    (a) one elongated cluster; (c) the same band with a quiescent gap column
    splitting it into two; (d) sparse bridge events in the gap; (e) the gap
    fills and the two clusters merge.
    """
    left = frozenset(m for m in _disc(20, 12, 4.6) if m[1] <= 15)
    right = frozenset((i, 32 - j) for i, j in left)  # mirror image across column 16
    gap = frozenset((i, 16) for i in range(16, 25))
    whole = left | right | gap
    bridge = frozenset({(20, 16)})
    phases = (
        Phase("a", months[0], (whole,), rate),
        Phase("c", months[1], (left, right), rate),
        Phase("d", months[2], (left, right), rate, bridge, bridge_rate),
        Phase("e", months[3], (whole,), rate),
    )
    return ScenarioSpec(phases=phases, seed=seed, process=process)


def random_catalog(n_events: int, universe: Region, start: datetime, n_months: int,
                   seed: int = 0, n_hotspots: int = 400, hotspot_share: float = 0.85,
                   grid: GridSpec = GridSpec()) -> EventTable:
    """Clustered random seismicity of about ``n_events`` events.

    A share of the events falls into randomly placed hotspot meshes (with
    power-law weights), the rest is scattered uniformly.
    """
    rng = np.random.default_rng(seed)
    nx, ny = grid.shape(universe)
    n_hot = int(n_events * hotspot_share)
    n_bg = n_events - n_hot
    hot = np.column_stack([rng.integers(0, nx, n_hotspots), rng.integers(0, ny, n_hotspots)])
    w = rng.pareto(1.2, n_hotspots) + 1.0
    # hotspots spill into their 3x3 neighbourhood
    pick = rng.choice(n_hotspots, size=n_hot, p=w / w.sum())
    di = rng.integers(-1, 2, n_hot)
    dj = rng.integers(-1, 2, n_hot)
    mi = np.clip(hot[pick, 0] + di, 0, nx - 1)
    mj = np.clip(hot[pick, 1] + dj, 0, ny - 1)
    lat = np.concatenate([universe.x0 + (mi + rng.uniform(0.05, 0.95, n_hot)) * grid.dx,
                          universe.x0 + rng.random(n_bg) * universe.x_len])
    lon = np.concatenate([universe.y0 + (mj + rng.uniform(0.05, 0.95, n_hot)) * grid.dy,
                          universe.y0 + rng.random(n_bg) * universe.y_len])
    end = add_months(start, n_months)
    times = _times(rng, n_events, start, end)
    mags = gr_magnitudes(rng, n_events)
    return EventTable(times, lat, lon, np.full(n_events, 10.0), mags).sorted()


# --------------------------------------------------------------------------
# scenario files


def _rects(rects) -> frozenset:
    """Mesh set from ``[i0, j0, i1, j1]`` rectangles (end-exclusive)."""
    out = set()
    for i0, j0, i1, j1 in rects:
        out |= {(i, j) for i in range(int(i0), int(i1)) for j in range(int(j0), int(j1))}
    return frozenset(out)


def scenario_from_dict(d: dict) -> ScenarioSpec | tuple:
    """Read a ``[synthetic]`` table.

    ``preset = "figure1" | "transition"`` picks a ready-made schedule
    (``seed``, ``rate`` and ``process`` still apply). ``preset = "random"``
    returns ``("random", kwargs)`` for :func:`random_catalog`. Otherwise
    ``phases`` lists ``{name, months, rate, clusters, bridge, bridge_rate}``
    where a cluster is a list of ``[i0, j0, i1, j1]`` mesh rectangles.
    """
    from resi.grid import Region

    d = dict(d)
    preset = d.pop("preset", None)
    seed = int(d.pop("seed", 0))
    if preset == "figure1":
        return figure1_scenario(seed, int(d.get("rate", 2)), d.get("process", "fixed"))
    if preset == "transition":
        return transition_scenario(seed, float(d.get("rate", 3.0)), d.get("process", "poisson"),
                                   bridge_rate=float(d.get("bridge_rate", 0.1)))
    if preset == "random":
        lat0, lon0, lat1, lon1 = (float(v) for v in str(d.get("universe", "25,125,49,149")).split(","))
        y, m = (int(p) for p in str(d.get("start", "1983-01")).split("-")[:2])
        return ("random", dict(n_events=int(d.get("n_events", 10_000)),
                               universe=Region.from_corners(lat0, lon0, lat1, lon1),
                               start=datetime(y, m, 1), n_months=int(d.get("months", 411)),
                               seed=seed))
    if preset is not None:
        raise ValueError(f"unknown preset {preset!r}")
    if "phases" not in d:
        raise ValueError("a scenario needs a preset or a list of phases")
    phases = tuple(
        Phase(p["name"], int(p["months"]), tuple(_rects(c) for c in p.get("clusters", [])),
              float(p.get("rate", 3.0)), _rects(p.get("bridge", [])), float(p.get("bridge_rate", 0.0)))
        for p in d["phases"])
    kw = {}
    if "universe" in d:
        lat0, lon0, lat1, lon1 = (float(v) for v in str(d["universe"]).split(","))
        kw["universe"] = Region.from_corners(lat0, lon0, lat1, lon1)
    if "start" in d:
        y, m = (int(p) for p in str(d["start"]).split("-")[:2])
        kw["t0"] = datetime(y, m, 1)
    for key in ("background_rate", "scatter_rate", "b_value", "mag_floor"):
        if key in d:
            kw[key] = float(d[key])
    if "process" in d:
        kw["process"] = d["process"]
    if "background" in d:
        kw["background"] = tuple(_rects(c) for c in d["background"])
    return ScenarioSpec(phases=phases, seed=seed, **kw)


def events_from_dict(d: dict):
    """Generate the events of a ``[synthetic]`` table; returns ``(events, universe, t0, t_end)``."""
    spec = scenario_from_dict(d)
    if isinstance(spec, tuple):
        kw = spec[1]
        return (random_catalog(**kw), kw["universe"], kw["start"],
                add_months(kw["start"], kw["n_months"]))
    return generate(spec), spec.universe, spec.t0, spec.t_end
