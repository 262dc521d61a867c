"""Mesh and cell geometry, calendar time windows, and event binning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Sequence

import numpy as np

# Tolerance for floor indexing: catalog coordinates carry 1/100 arc-minute
# precision, so anything closer than this to a mesh edge sits on the edge.
_EDGE_EPS = 1e-9


class GridError(ValueError):
    """Raised for geometry that cannot be tiled as requested."""


@dataclass(frozen=True)
class Region:
    """Lat/lon-aligned rectangle ``(x0, y0) - (x0 + x_len, y0 + y_len)``.

    ``x`` is latitude and ``y`` is longitude, both in degrees. Membership is
    half-open: the max-lat and max-lon edges are outside.
    """

    x0: float
    y0: float
    x_len: float
    y_len: float

    def __post_init__(self):
        if not (self.x_len > 0 and self.y_len > 0):
            raise GridError(f"region extents must be positive, got {self.x_len}, {self.y_len}")

    @classmethod
    def from_corners(cls, lat0, lon0, lat1, lon1) -> "Region":
        return cls(lat0, lon0, lat1 - lat0, lon1 - lon0)

    @classmethod
    def whole_earth(cls) -> "Region":
        # x_len > 180 so that the north pole itself is inside
        return cls(-90.0, -180.0, 181.0, 360.0)

    @property
    def x1(self) -> float:
        return self.x0 + self.x_len

    @property
    def y1(self) -> float:
        return self.y0 + self.y_len

    def contains(self, lat: float, lon: float) -> bool:
        return self.x0 <= lat < self.x1 and self.y0 <= lon < self.y1

    def contains_array(self, lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
        return (lat >= self.x0) & (lat < self.x1) & (lon >= self.y0) & (lon < self.y1)

    def corners(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    def __str__(self) -> str:
        return f"({self.x0:g},{self.y0:g})-({self.x1:g},{self.y1:g})"


@dataclass(frozen=True)
class GridSpec:
    """Mesh widths and the quaking-mesh threshold.

    Attributes:
        dx: mesh width in latitude (degrees).
        dy: mesh width in longitude (degrees).
        theta_m: a mesh is quaking when its count is strictly greater.
        m_theta: events below this magnitude are not counted.
    """

    dx: float = 0.1
    dy: float = 0.1
    theta_m: int = 1
    m_theta: float = 2.0

    def __post_init__(self):
        if self.dx <= 0 or self.dy <= 0:
            raise GridError("mesh widths must be positive")
        if self.theta_m < 0:
            raise GridError("theta_m must be >= 0")

    def shape(self, region: Region) -> tuple[int, int]:
        """Number of meshes along latitude and longitude for ``region``."""
        return (_divide(region.x_len, self.dx), _divide(region.y_len, self.dy))


def _divide(length: float, step: float) -> int:
    n = length / step
    k = round(n)
    if abs(n - k) > 1e-6:
        raise GridError(f"{step:g} does not divide {length:g}")
    return int(k)


def mesh_index(lat: float, lon: float, region: Region, spec: GridSpec) -> tuple[int, int] | None:
    """Return the ``(i, j)`` mesh holding the point, or None outside ``region``."""
    if not region.contains(lat, lon):
        return None
    nx, ny = spec.shape(region)
    i = math.floor((lat - region.x0) / spec.dx + _EDGE_EPS)
    j = math.floor((lon - region.y0) / spec.dy + _EDGE_EPS)
    if i >= nx or j >= ny:
        return None
    return (i, j)


def mesh_indices(lat: np.ndarray, lon: np.ndarray, region: Region, spec: GridSpec):
    """Vectorised :func:`mesh_index`.

    Returns:
        ``(i, j, inside)`` integer arrays plus the in-region mask. Entries
        where ``inside`` is False are meaningless.
    """
    nx, ny = spec.shape(region)
    i = np.floor((lat - region.x0) / spec.dx + _EDGE_EPS).astype(np.int64)
    j = np.floor((lon - region.y0) / spec.dy + _EDGE_EPS).astype(np.int64)
    inside = region.contains_array(lat, lon) & (i < nx) & (j < ny)
    return i, j, inside


def cell_grid(universe: Region, cell_len: float) -> list[Region]:
    """Tile ``universe`` with square cells, row-major from the south-west corner.

    Cell ``k`` sits at latitude row ``k // n_cols`` and longitude column
    ``k % n_cols``.
    """
    n_rows = _divide(universe.x_len, cell_len)
    n_cols = _divide(universe.y_len, cell_len)
    return [
        Region(universe.x0 + r * cell_len, universe.y0 + c * cell_len, cell_len, cell_len)
        for r in range(n_rows)
        for c in range(n_cols)
    ]


def cell_shape(universe: Region, cell_len: float) -> tuple[int, int]:
    return (_divide(universe.x_len, cell_len), _divide(universe.y_len, cell_len))


# --------------------------------------------------------------------------
# time windows


def add_months(t: datetime, n: int) -> datetime:
    k = t.year * 12 + (t.month - 1) + n
    return t.replace(year=k // 12, month=k % 12 + 1)


def months_between(a: datetime, b: datetime) -> int:
    """Whole calendar months from ``a`` to ``b`` (by month field only)."""
    return (b.year - a.year) * 12 + (b.month - a.month)


@dataclass(frozen=True)
class TimeWindow:
    """Calendar-aligned half-open window ``[start, end)``."""

    start: datetime
    t_len: str = "month"

    def __post_init__(self):
        if self.t_len not in ("month", "year"):
            raise GridError(f"window length must be 'month' or 'year', got {self.t_len!r}")

    @property
    def end(self) -> datetime:
        return add_months(self.start, 1 if self.t_len == "month" else 12)

    @property
    def months(self) -> int:
        return 1 if self.t_len == "month" else 12

    def label(self) -> str:
        if self.t_len == "year":
            return f"{self.start:%Y}"
        return f"{self.start:%Y-%m}"


def make_windows(start: datetime, end: datetime, t_len: str = "month") -> list[TimeWindow]:
    """Windows tiling ``[start, end)``; ``start`` is snapped to its month/year."""
    start = start.replace(day=1, hour=0, minute=0, second=0, microsecond=0)
    if t_len == "year":
        start = start.replace(month=1)
    step = 1 if t_len == "month" else 12
    out = []
    t = start
    while t < end:
        out.append(TimeWindow(t, t_len))
        t = add_months(t, step)
    return out


def window_index(times: np.ndarray, windows: Sequence[TimeWindow]) -> np.ndarray:
    """Index of the window holding each time, or -1 outside all windows.

    Windows must be contiguous and sorted.
    """
    if not windows:
        return np.full(len(times), -1, dtype=np.int64)
    edges = np.array([w.start for w in windows] + [windows[-1].end], dtype="datetime64[us]")
    idx = np.searchsorted(edges, times.astype("datetime64[us]"), side="right") - 1
    idx[(idx < 0) | (idx >= len(windows))] = -1
    return idx


# --------------------------------------------------------------------------
# binning


@dataclass(frozen=True)
class MeshWindowCounts:
    """Per-mesh counts for one region and one window.

    Attributes:
        counts: mesh ``(i, j)`` -> count; meshes with no events are absent.
        quakes_region: all counted events inside the region, including those
            in meshes that will not qualify as quaking.
        total_in_universe: counted events in the whole universe.
    """

    region: Region
    window: TimeWindow
    counts: dict = field(default_factory=dict)
    quakes_region: int = 0
    total_in_universe: int = 0

    def count(self, mesh) -> int:
        return self.counts.get(mesh, 0)


def bin_events(events, region: Region, spec: GridSpec, windows: Sequence[TimeWindow],
               universe: Region | None = None) -> list[MeshWindowCounts]:
    """Count events per mesh and window.

    Args:
        events: an :class:`~resi.catalog.EventTable` or iterable of events.
        region: region to mesh.
        spec: mesh geometry and magnitude cutoff.
        windows: contiguous, sorted time windows.
        universe: region for the ``total_in_universe`` denominators;
            defaults to ``region``.
    """
    from resi.catalog import EventTable

    if not isinstance(events, EventTable):
        events = EventTable.from_events(events)
    universe = region if universe is None else universe
    keep = events.mag >= spec.m_theta - 1e-9
    lat, lon, times = events.lat[keep], events.lon[keep], events.time[keep]

    n_win = len(windows)
    widx = window_index(times, windows)
    in_time = widx >= 0

    in_uni = universe.contains_array(lat, lon) & in_time
    uni_tot = np.bincount(widx[in_uni], minlength=n_win)

    i, j, inside = mesh_indices(lat, lon, region, spec)
    inside &= in_time
    reg_tot = np.bincount(widx[inside], minlength=n_win)

    nx, ny = spec.shape(region)
    key = (widx[inside] * nx + i[inside]) * ny + j[inside]
    uniq, cnt = np.unique(key, return_counts=True)
    per_window: list[dict] = [{} for _ in range(n_win)]
    w_of = uniq // (nx * ny)
    rem = uniq % (nx * ny)
    for w, r, c in zip(w_of.tolist(), rem.tolist(), cnt.tolist()):
        per_window[w][(r // ny, r % ny)] = c

    return [
        MeshWindowCounts(region, win, per_window[k], int(reg_tot[k]), int(uni_tot[k]))
        for k, win in enumerate(windows)
    ]


def quaking_meshes(counts: MeshWindowCounts, spec: GridSpec) -> set:
    """``Msh(S)``: meshes whose count exceeds ``theta_m``."""
    return {m for m, c in counts.counts.items() if c > spec.theta_m}


def tally(events: Iterable, region: Region, spec: GridSpec) -> dict:
    """Per-mesh counts of single-window event iterable (no time filter)."""
    out: dict = {}
    for ev in events:
        if ev.magnitude < spec.m_theta - 1e-9:
            continue
        m = mesh_index(ev.lat, ev.lon, region, spec)
        if m is not None:
            out[m] = out.get(m, 0) + 1
    return out
