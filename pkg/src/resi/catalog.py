"""JMA hypocenter records: parsing, re-encoding, filtering and CSV export.

A record is one fixed-width line. Column offsets live in a :class:`ColumnMap`
so that other catalog vintages can be read by supplying a different map.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from resi.grid import Region

log = logging.getLogger(__name__)

CSV_HEADER = ("time_utc", "lat_deg", "lon_deg", "depth_km", "mag")

T_START = datetime(1983, 1, 1)
T_END = datetime(2017, 4, 1)

# leading character of the magnitude field for negative values
_NEG_MAG = {"-": 0, "A": 1, "B": 2, "C": 3}
_NEG_MAG_INV = {v: k for k, v in _NEG_MAG.items()}


class ParseError(ValueError):
    def __init__(self, reason: str, line_no: int | None = None):
        self.reason = reason
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(where + reason)


@dataclass(frozen=True)
class ColumnMap:
    """0-based ``(start, stop)`` slices of each field in a record.

    The defaults follow the JMA hypocenter format (seconds, minutes and
    their errors carry two implied decimals; depth carries two implied
    decimals unless the depth was fixed, in which case the last two columns
    are blank).
    """

    record_types: str = "J"
    year: tuple = (1, 5)
    month: tuple = (5, 7)
    day: tuple = (7, 9)
    hour: tuple = (9, 11)
    minute: tuple = (11, 13)
    second: tuple = (13, 17)
    time_err: tuple = (17, 21)
    lat_deg: tuple = (21, 24)
    lat_min: tuple = (24, 28)
    lat_err: tuple = (28, 32)
    lon_deg: tuple = (32, 36)
    lon_min: tuple = (36, 40)
    lon_err: tuple = (40, 44)
    depth: tuple = (44, 49)
    magnitude: tuple = (52, 54)
    # catalog clock minus UTC; JMA records are in JST
    utc_offset_hours: float = 9.0

    @property
    def min_length(self) -> int:
        return self.magnitude[1]

    @property
    def width(self) -> int:
        return max(v[1] for v in vars(self).values() if isinstance(v, tuple))


JMA_COLUMNS = ColumnMap()


@dataclass(frozen=True, slots=True)
class Event:
    """One catalog record.

    ``time`` is naive UTC. Error fields are None when blank in the record;
    ``lat_err``/``lon_err`` are in degrees and ``time_err`` in seconds.
    """

    time: datetime
    lat: float
    lon: float
    depth: float | None
    magnitude: float
    lat_err: float | None = None
    lon_err: float | None = None
    time_err: float | None = None
    depth_fixed: bool = False


def _field(line: str, span: tuple) -> str:
    return line[span[0]:span[1]]


def _int(text: str, name: str, line_no) -> int:
    s = text.strip()
    if not s or not s.lstrip("-").isdigit():
        raise ParseError(f"non-numeric {name} field {text!r}", line_no)
    return int(s)


def _implied(text: str, decimals: int = 2) -> float | None:
    """Decode a fixed-point field with implied decimals; blank -> None."""
    s = text.strip()
    if not s:
        return None
    s = s.replace(" ", "0")
    if not s.lstrip("-").isdigit():
        raise ValueError(text)
    return int(s) / 10 ** decimals


def decode_degrees(deg_field: str, min_field: str) -> float:
    """``dd`` plus ``mm.mm`` minutes (two implied decimals) as decimal degrees."""
    deg = int(deg_field.strip())
    minutes = _implied(min_field) or 0.0
    if deg_field.strip().startswith("-"):
        return deg - minutes / 60.0
    return deg + minutes / 60.0


def decode_magnitude(text: str) -> float:
    """Two-character JMA magnitude ``xy`` -> ``x + y/10``.

    Negative magnitudes use ``-y`` (-0.y) and ``Ay``/``By``/``Cy`` for
    -1.y, -2.y, -3.y.
    """
    if len(text) != 2 or not text.strip():
        raise ValueError(f"blank magnitude {text!r}")
    head, tail = text[0], text[1]
    if head in _NEG_MAG:
        if not tail.isdigit():
            raise ValueError(text)
        return -round(_NEG_MAG[head] + int(tail) / 10, 1)
    s = text.replace(" ", "0")
    if not s.isdigit():
        raise ValueError(text)
    return int(s) / 10


def encode_magnitude(m: float) -> str:
    tenths = int(round(m * 10))
    if tenths >= 0:
        return f"{tenths:02d}"
    whole, frac = divmod(-tenths, 10)
    return f"{_NEG_MAG_INV[whole]}{frac}"


def parse_record(line: str, columns: ColumnMap = JMA_COLUMNS, line_no: int | None = None) -> Event:
    """Decode one fixed-width record.

    Raises:
        ParseError: wrong record type, short record, bad date/time or
            non-numeric magnitude/location.
    """
    line = line.rstrip("\r\n")
    if not line or line[0] not in columns.record_types:
        raise ParseError("not a hypocenter record", line_no)
    if len(line) < columns.min_length:
        raise ParseError(f"record shorter than {columns.min_length} columns", line_no)
    f = lambda name: _field(line, getattr(columns, name))  # noqa: E731
    try:
        sec = _implied(f("second"))
        stamp = datetime(
            _int(f("year"), "year", line_no), _int(f("month"), "month", line_no),
            _int(f("day"), "day", line_no), _int(f("hour"), "hour", line_no),
            _int(f("minute"), "minute", line_no),
        )
    except (ValueError, ParseError) as err:
        raise ParseError(f"malformed date/time ({err})", line_no) from None
    if sec is None or not 0 <= sec < 61:
        raise ParseError(f"malformed seconds {f('second')!r}", line_no)
    stamp += timedelta(seconds=sec) - timedelta(hours=columns.utc_offset_hours)

    try:
        mag = decode_magnitude(f("magnitude"))
    except ValueError:
        raise ParseError(f"non-numeric magnitude {f('magnitude')!r}", line_no) from None
    if not -2.0 <= mag <= 10.0:
        raise ParseError(f"magnitude {mag} outside [-2, 10]", line_no)

    try:
        lat = decode_degrees(f("lat_deg"), f("lat_min"))
        lon = decode_degrees(f("lon_deg"), f("lon_min"))
        lat_err = _implied(f("lat_err"))
        lon_err = _implied(f("lon_err"))
        time_err = _implied(f("time_err"))
        depth, fixed = _decode_depth(f("depth"))
    except ValueError:
        raise ParseError("non-numeric location field", line_no) from None
    if not -90 <= lat <= 90:
        raise ParseError(f"latitude {lat} out of range", line_no)
    if lon >= 180:
        lon -= 360
    return Event(
        time=stamp, lat=lat, lon=lon, depth=depth, magnitude=mag,
        lat_err=None if lat_err is None else lat_err / 60.0,
        lon_err=None if lon_err is None else lon_err / 60.0,
        time_err=time_err, depth_fixed=fixed,
    )


def _decode_depth(text: str) -> tuple[float | None, bool]:
    if not text.strip():
        return None, False
    if len(text) == 5 and not text[3:].strip():
        return float(int(text[:3])), True
    return _implied(text), False


def _encode_implied(value: float | None, width: int, decimals: int = 2) -> str:
    if value is None:
        return " " * width
    return f"{int(round(value * 10 ** decimals)):{width}d}"


def _encode_degrees(value: float, deg_width: int) -> tuple[str, str]:
    sign = -1 if value < 0 else 1
    hundredths = int(round(abs(value) * 6000))
    deg, minutes = divmod(hundredths, 6000)
    # keep the sign even when the whole degrees are zero ("-0")
    return f"{'-' if sign < 0 else ''}{deg}".rjust(deg_width), f"{minutes:04d}"


def encode_record(ev: Event, columns: ColumnMap = JMA_COLUMNS) -> str:
    """Inverse of :func:`parse_record` for the numeric fields it decodes."""
    local = ev.time + timedelta(hours=columns.utc_offset_hours)
    centis = int(round(local.microsecond / 10_000))
    if centis == 100:  # rounding spill-over
        local = local.replace(microsecond=0) + timedelta(seconds=1)
        centis = 0
    buf = [" "] * columns.width
    buf[0] = columns.record_types[0]

    def put(name, text):
        a, b = getattr(columns, name)
        if len(text) != b - a:
            raise ValueError(f"{name}: {text!r} does not fit {b - a} columns")
        buf[a:b] = text

    put("year", f"{local.year:04d}")
    put("month", f"{local.month:02d}")
    put("day", f"{local.day:02d}")
    put("hour", f"{local.hour:02d}")
    put("minute", f"{local.minute:02d}")
    put("second", f"{local.second:02d}{centis:02d}")
    put("time_err", _encode_implied(ev.time_err, 4))
    lat_w = columns.lat_deg[1] - columns.lat_deg[0]
    lon_w = columns.lon_deg[1] - columns.lon_deg[0]
    d, m = _encode_degrees(ev.lat, lat_w)
    put("lat_deg", d)
    put("lat_min", m)
    put("lat_err", _encode_implied(None if ev.lat_err is None else ev.lat_err * 60, 4))
    d, m = _encode_degrees(ev.lon, lon_w)
    put("lon_deg", d)
    put("lon_min", m)
    put("lon_err", _encode_implied(None if ev.lon_err is None else ev.lon_err * 60, 4))
    if ev.depth is None:
        put("depth", "     ")
    elif ev.depth_fixed:
        put("depth", f"{int(round(ev.depth)):3d}  ")
    else:
        put("depth", _encode_implied(ev.depth, 5))
    put("magnitude", encode_magnitude(ev.magnitude))
    return "".join(buf)


# --------------------------------------------------------------------------
# bulk reading


@dataclass
class ParseResult:
    events: list
    rejects: list = field(default_factory=list)  # (source, line_no, reason)
    n_lines: int = 0

    @property
    def n_rejected(self) -> int:
        return len(self.rejects)


def parse_lines(lines: Iterable[str], columns: ColumnMap = JMA_COLUMNS,
                source: str = "<lines>", result: ParseResult | None = None) -> ParseResult:
    """Parse every line; every line ends up either in events or in rejects."""
    result = result if result is not None else ParseResult([])
    events, rejects = result.events, result.rejects
    n = 0
    for n, line in enumerate(lines, 1):
        try:
            events.append(parse_record(line, columns, n))
        except ParseError as err:
            rejects.append((source, n, err.reason))
    result.n_lines += n
    return result


def read_catalog(paths: Sequence[str | Path], columns: ColumnMap = JMA_COLUMNS) -> ParseResult:
    result = ParseResult([])
    for p in paths:
        with open(p, encoding="ascii", errors="replace") as fh:
            parse_lines(fh, columns, str(p), result)
    if result.rejects:
        log.info("rejected %d of %d records", result.n_rejected, result.n_lines)
    return result


# --------------------------------------------------------------------------
# columnar form


@dataclass(frozen=True)
class EventTable:
    """Column arrays for a stream of events; ``time`` is ``datetime64[us]``."""

    time: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    depth: np.ndarray
    mag: np.ndarray

    @classmethod
    def empty(cls) -> "EventTable":
        z = np.zeros(0)
        return cls(np.zeros(0, dtype="datetime64[us]"), z, z.copy(), z.copy(), z.copy())

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> "EventTable":
        events = list(events)
        if not events:
            return cls.empty()
        return cls(
            np.array([e.time for e in events], dtype="datetime64[us]"),
            np.array([e.lat for e in events], dtype=float),
            np.array([e.lon for e in events], dtype=float),
            np.array([np.nan if e.depth is None else e.depth for e in events], dtype=float),
            np.array([e.magnitude for e in events], dtype=float),
        )

    def __len__(self) -> int:
        return len(self.mag)

    def take(self, idx) -> "EventTable":
        return EventTable(self.time[idx], self.lat[idx], self.lon[idx], self.depth[idx], self.mag[idx])

    def sorted(self) -> "EventTable":
        return self.take(np.argsort(self.time, kind="stable"))

    def concat(self, other: "EventTable") -> "EventTable":
        return EventTable.stack([self, other])

    @classmethod
    def stack(cls, tables: Sequence["EventTable"]) -> "EventTable":
        tables = [t for t in tables if len(t)]
        if not tables:
            return cls.empty()
        return cls(*(np.concatenate([getattr(t, f) for t in tables])
                     for f in ("time", "lat", "lon", "depth", "mag")))

    def to_events(self) -> list[Event]:
        times = self.time.astype("datetime64[us]").tolist()
        return [
            Event(t, la, lo, None if np.isnan(d) else d, m)
            for t, la, lo, d, m in zip(times, self.lat.tolist(), self.lon.tolist(),
                                       self.depth.tolist(), self.mag.tolist())
        ]


@dataclass(frozen=True)
class CatalogFilter:
    m0: float = 2.0
    region: Region = field(default_factory=Region.whole_earth)
    t_start: datetime = T_START
    t_end: datetime = T_END  # exclusive

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError("t_start must precede t_end")


def _keep(ev: Event, f: CatalogFilter) -> bool:
    return (ev.magnitude >= f.m0 - 1e-9 and f.region.contains(ev.lat, ev.lon)
            and f.t_start <= ev.time < f.t_end)


def filter_events(events, f: CatalogFilter):
    """Keep events with magnitude >= m0, inside the region and time range.

    Accepts an :class:`EventTable` (returns one) or any iterable of
    :class:`Event` (returns a list). Aftershocks are kept.
    """
    if isinstance(events, EventTable):
        t = events.time
        mask = ((events.mag >= f.m0 - 1e-9) & f.region.contains_array(events.lat, events.lon)
                & (t >= np.datetime64(f.t_start, "us")) & (t < np.datetime64(f.t_end, "us")))
        return events.take(mask)
    return [ev for ev in events if _keep(ev, f)]


# --------------------------------------------------------------------------
# CSV


def _iso(t: datetime) -> str:
    return f"{t:%Y-%m-%dT%H:%M:%S}.{t.microsecond // 10_000:02d}Z"


def write_csv(events, out) -> None:
    """Normalized event CSV. ``out`` is a path or a text stream."""
    if isinstance(events, EventTable):
        events = events.to_events()
    own = not hasattr(out, "write")
    fh = open(out, "w", newline="") if own else out
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for ev in events:
            w.writerow((_iso(ev.time), f"{ev.lat:.5f}", f"{ev.lon:.5f}",
                        "" if ev.depth is None else f"{ev.depth:.2f}", f"{ev.magnitude:.1f}"))
    finally:
        if own:
            fh.close()


def read_csv(src) -> EventTable:
    own = not hasattr(src, "read")
    fh = open(src, newline="") if own else src
    try:
        rows = list(csv.DictReader(fh))
    finally:
        if own:
            fh.close()
    if not rows:
        return EventTable.empty()
    times = np.array([r["time_utc"].rstrip("Z") for r in rows], dtype="datetime64[us]")
    col = lambda k: np.array([float(r[k]) if r[k] else np.nan for r in rows])  # noqa: E731
    return EventTable(times, col("lat_deg"), col("lon_deg"), col("depth_km"), col("mag"))


def to_csv_string(events) -> str:
    buf = io.StringIO()
    write_csv(events, buf)
    return buf.getvalue()


def write_records(events, path, columns: ColumnMap = JMA_COLUMNS) -> None:
    if isinstance(events, EventTable):
        events = events.to_events()
    with open(path, "w") as fh:
        for ev in events:
            fh.write(encode_record(ev, columns) + "\n")


def iter_records(events, columns: ColumnMap = JMA_COLUMNS) -> Iterator[str]:
    if isinstance(events, EventTable):
        events = events.to_events()
    for ev in events:
        yield encode_record(ev, columns)


def with_columns(**overrides) -> ColumnMap:
    """Default JMA map with some fields moved, e.g. for an older vintage."""
    return replace(JMA_COLUMNS, **overrides)
