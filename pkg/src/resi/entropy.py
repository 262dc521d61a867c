"""Cluster entropy ``H(S,t)`` and the regional entropy ``Hr(S,t)``.

``Hr(S,t) = H(S,t) - log p(S,t)``, where ``H`` is taken over the clusters
of region ``S`` with ``p(C|S,t)`` as the cluster shares, and ``p(S,t)`` is
the region's share of all events in the universe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Sequence

from resi.clustering import cluster_probabilities, make_clusters
from resi.grid import GridSpec, Region, TimeWindow, bin_events, quaking_meshes

# Months averaged into Hr_avr for monthly series.
AVR_SPAN = 6


@dataclass(frozen=True)
class ResiPoint:
    """RESI for one cell and one window.

    ``no_data`` windows (no events in the cell, or no quaking mesh) carry
    ``h = hr = 0``. ``residual`` is the share of the cell's events outside
    every cluster. ``hr_avr`` is None when no defined value is in reach.
    """

    cell_id: int
    window_start: datetime
    h: float
    hr: float
    hr_avr: float | None
    p_s: float
    no_data: bool
    t_len: str = "month"
    n_clusters: int = 0
    residual: float = 0.0


def entropy_h(probabilities: Sequence[float], base: float = math.e) -> float:
    """``-sum p log p`` with ``0 log 0 = 0``.

    Raises:
        ValueError: for a negative probability.
    """
    terms = []
    for p in probabilities:
        if p < 0:
            raise ValueError(f"negative probability {p}")
        if p > 0:
            terms.append(p * math.log(p))
    h = -math.fsum(terms)
    if base != math.e:
        h /= math.log(base)
    return h + 0.0  # no -0.0


def resi(h: float, p_s: float, base: float = math.e) -> float | None:
    """``h - log p_s``; None when ``p_s`` is 0 (no data)."""
    if p_s <= 0:
        return None
    if p_s > 1 + 1e-12:
        raise ValueError(f"p(S,t) must be <= 1, got {p_s}")
    return h - math.log(p_s, base) if base != math.e else h - math.log(p_s)


def trailing_means(values: Sequence[float], defined: Sequence[bool], span: int) -> list:
    """Mean of the defined values among the last ``span`` points, per point."""
    out = []
    for k in range(len(values)):
        window = [values[q] for q in range(max(0, k - span + 1), k + 1) if defined[q]]
        out.append(math.fsum(window) / len(window) if window else None)
    return out


def window_resi(counts, spec: GridSpec, cell_id: int = 0, base: float = math.e) -> ResiPoint:
    """Steps 1-2 for one window: quaking meshes, clusters, H and Hr."""
    msh = quaking_meshes(counts, spec)
    probs = None
    if msh:
        probs = cluster_probabilities(make_clusters(msh), counts)
    p_s = counts.quakes_region / counts.total_in_universe if counts.total_in_universe else 0.0
    if probs is None:
        return ResiPoint(cell_id, counts.window.start, 0.0, 0.0, None, p_s, True,
                         counts.window.t_len, 0, 1.0 if counts.quakes_region else 0.0)
    h = entropy_h(probs.conditional, base)
    return ResiPoint(cell_id, counts.window.start, h, resi(h, probs.p_region, base), None,
                     probs.p_region, False, counts.window.t_len, len(probs.counts), probs.residual)


def with_averages(series: Sequence[ResiPoint]) -> list[ResiPoint]:
    """Fill ``hr_avr`` (6-point trailing mean, or ``hr`` itself for yearly series)."""
    if not series:
        return []
    span = 1 if series[0].t_len == "year" else AVR_SPAN
    avr = trailing_means([p.hr for p in series], [not p.no_data for p in series], span)
    return [replace(p, hr_avr=a) for p, a in zip(series, avr)]


def resi_series(events, cell: Region, spec: GridSpec, windows: Sequence[TimeWindow],
                universe: Region | None = None, cell_id: int = 0,
                base: float = math.e) -> list[ResiPoint]:
    """RESI for every window of one cell, with ``hr_avr`` filled in."""
    counts = bin_events(events, cell, spec, windows, universe)
    return with_averages([window_resi(c, spec, cell_id, base) for c in counts])


def hr_avr(series: Sequence[ResiPoint], t) -> float | None:
    """Mean ``hr`` over the 6 monthly points ending at ``t``.

    ``t`` is an index into ``series`` or a window start. Points without data
    are skipped, so near the series start (or after gaps) fewer points are
    averaged. For yearly series this is ``hr`` itself.
    """
    k = _locate(series, t)
    span = 1 if series[k].t_len == "year" else AVR_SPAN
    vals = [p.hr for p in series[max(0, k - span + 1):k + 1] if not p.no_data]
    return math.fsum(vals) / len(vals) if vals else None


def _locate(series: Sequence[ResiPoint], t) -> int:
    if isinstance(t, int):
        return t
    for k, p in enumerate(series):
        if p.window_start == t:
            return k
    raise KeyError(t)


def aggregate_resi(subcells: Sequence[tuple[float, float]]) -> float | None:
    """RESI of a union of disjoint sub-regions from their ``(p(S_i,t), Hr(S_i,t))``.

    The ``p``-weighted mean of the sub-region values. None when no
    sub-region holds any event.
    """
    total = math.fsum(p for p, _ in subcells)
    if total <= 0:
        return None
    return math.fsum(p * hr for p, hr in subcells) / total


def aggregate_series(per_cell: Sequence[Sequence[ResiPoint]]) -> list[float | None]:
    """Window-by-window :func:`aggregate_resi` across cells (no-data cells skipped)."""
    if not per_cell:
        return []
    out = []
    for k in range(len(per_cell[0])):
        pts = [s[k] for s in per_cell if not s[k].no_data]
        out.append(aggregate_resi([(p.p_s, p.hr) for p in pts]))
    return out
