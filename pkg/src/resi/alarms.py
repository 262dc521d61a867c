"""Precursor alarms on RESI (``Hr_sat``), the activity index and the
``high_*`` indicator series."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np

from resi.entropy import ResiPoint, _locate
from resi.grid import months_between

# logarithmic base of the JMA magnitude scale (10 ** 1.5)
ENERGY_BASE = 31.62


@dataclass(frozen=True)
class AlarmConfig:
    """Parameters of the ``Hr_sat`` alarm.

    Attributes:
        T: cap of the rank window, years.
        dt: stdev window, months.
        gamma: rank fraction.
        theta_std: stdev threshold, in Hr units.
        t0: start of the data.
        warmup: years after ``t0`` before any alarm.
        rank_unit: ``"years"`` compares the rank against ``gamma`` times the
            rank window length in years; ``"samples"`` against ``gamma``
            times its length in samples.
        min_points: fewest defined points a rank or stdev window needs.
    """

    T: float = 28.0
    dt: int = 12
    gamma: float = 0.1
    theta_std: float = 0.5
    t0: datetime = datetime(1983, 1, 1)
    warmup: float = 3.0
    rank_unit: str = "years"
    min_points: int = 3

    def __post_init__(self):
        if self.T < self.warmup:
            raise ValueError("T must be >= warmup")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not self.theta_std > 0:
            raise ValueError("theta_std must be positive")
        if self.rank_unit not in ("years", "samples"):
            raise ValueError(f"rank_unit must be 'years' or 'samples', got {self.rank_unit!r}")
        if self.dt < 2:
            raise ValueError("dt must be at least 2 months")


def activity(magnitudes: Sequence[float]) -> float | None:
    """Energy-equivalent magnitude ``log_31.62 sum 31.62**M``; None if empty."""
    mags = list(magnitudes)
    if not mags:
        return None
    top = max(mags)
    s = math.fsum(ENERGY_BASE ** (m - top) for m in mags)
    return top + math.log(s) / math.log(ENERGY_BASE)


def activity_by_window(window_idx: np.ndarray, mags: np.ndarray, n_windows: int) -> np.ndarray:
    """:func:`activity` for many windows at once; NaN where a window is empty."""
    out = np.full(n_windows, np.nan)
    ok = window_idx >= 0
    if not ok.any():
        return out
    w, m = window_idx[ok], mags[ok]
    top = np.full(n_windows, -np.inf)
    np.maximum.at(top, w, m)
    sums = np.bincount(w, weights=ENERGY_BASE ** (m - top[w]), minlength=n_windows)
    has = sums > 0
    out[has] = top[has] + np.log(sums[has]) / np.log(ENERGY_BASE)
    return out


def _pstd(values) -> float:
    return float(np.std(values)) if len(values) else 0.0


def _hr_sat_at(hr: np.ndarray, avr: np.ndarray, defined: np.ndarray, has_avr: np.ndarray,
               k: int, elapsed: int, yearly: bool, cfg: AlarmConfig) -> float:
    if not defined[k]:
        return 0.0
    if elapsed < round(cfg.warmup * 12):
        return 0.0
    step = 12 if yearly else 1
    span_months = min(round(cfg.T * 12), elapsed)
    span = span_months // step
    lo = max(0, k - span)

    # rank condition over the trailing window, both ends included
    ref = hr if yearly else avr
    ok = defined[lo:k + 1] if yearly else has_avr[lo:k + 1]
    if (yearly and not defined[k]) or (not yearly and not has_avr[k]):
        return 0.0
    pool = ref[lo:k + 1][ok]
    if len(pool) < cfg.min_points:
        return 0.0
    rank = 1 + int(np.count_nonzero(pool > ref[k]))
    limit = cfg.gamma * (span_months / 12 if cfg.rank_unit == "years" else span)
    if rank > limit:
        return 0.0

    # saturation or perturbation
    if yearly:
        if k == 0 or not defined[k - 1]:
            return 0.0
        return float(hr[k]) if abs(hr[k] - hr[k - 1]) < cfg.theta_std else 0.0
    w = cfg.dt
    full_lo = max(0, k - w)
    full = hr[full_lo:k + 1][defined[full_lo:k + 1]]
    if len(full) < cfg.min_points:
        return 0.0
    if _pstd(full) < cfg.theta_std:
        return float(hr[k])
    split = k - w // 2
    recent = hr[max(0, split):k + 1][defined[max(0, split):k + 1]]
    earlier = hr[full_lo:max(0, split)][defined[full_lo:max(0, split)]]
    if len(recent) >= 2 and len(earlier) >= 2 and _pstd(recent) > 2 * _pstd(earlier):
        return float(hr[k])
    return 0.0


def _arrays(series: Sequence[ResiPoint]):
    hr = np.array([p.hr for p in series], dtype=float)
    avr = np.array([np.nan if p.hr_avr is None else p.hr_avr for p in series], dtype=float)
    defined = np.array([not p.no_data for p in series], dtype=bool)
    return hr, avr, defined, ~np.isnan(avr)


def hr_sat(series: Sequence[ResiPoint], cfg: AlarmConfig, t) -> float:
    """Alarm value at ``t``: ``Hr(S,t)`` when the alarm fires, else 0.

    The alarm fires when (i) ``Hr_avr(S,t)`` ranks within the top
    ``gamma * min(T, t - t0)`` of the defined ``Hr_avr`` values in
    ``[t - min(T, t - t0), t]`` and (ii) the stdev of ``Hr`` over the last
    ``dt`` months is below ``theta_std``, or the stdev over the last half of
    that span exceeds twice the stdev over the first half. Yearly series
    rank ``Hr`` itself and use ``|Hr(t) - Hr(t - 1y)| < theta_std``.

    ``series`` must be contiguous windows of one cell; ``t`` is an index or
    a window start. Stdev is the population stdev with endpoints included:
    for ``dt = 12`` the full span has 13 points, the recent half 7 and the
    earlier half 6.
    """
    k = _locate(series, t)
    hr, avr, defined, has_avr = _arrays(series)
    p = series[k]
    return _hr_sat_at(hr, avr, defined, has_avr, k, _elapsed(cfg.t0, p), p.t_len == "year", cfg)


def _elapsed(t0: datetime, p: ResiPoint) -> int:
    return months_between(t0, p.window_start)


def hr_sat_series(series: Sequence[ResiPoint], cfg: AlarmConfig) -> list[float]:
    if not series:
        return []
    hr, avr, defined, has_avr = _arrays(series)
    yearly = series[0].t_len == "year"
    return [_hr_sat_at(hr, avr, defined, has_avr, k, _elapsed(cfg.t0, p), yearly, cfg)
            for k, p in enumerate(series)]


def high_hr(hr_sat_values: Sequence[float]) -> list[int]:
    return [1 if v > 0 else 0 for v in hr_sat_values]


def high_activity(values: Sequence[float | None], lookback: int = 24) -> list[int]:
    """Flag significant, locally unmatched activity peaks.

    ``t`` is flagged when its activity exceeds mean + stdev (population, over
    all windows with events) and is strictly larger than every defined
    value in the preceding ``lookback`` windows (24 months, or pass 2 for a
    yearly series). Windows without events are never flagged.
    """
    arr = np.array([np.nan if v is None else v for v in values], dtype=float)
    ok = ~np.isnan(arr)
    out = [0] * len(arr)
    if not ok.any():
        return out
    bar = float(np.mean(arr[ok]) + np.std(arr[ok]))
    for k in np.flatnonzero(ok):
        if arr[k] <= bar:
            continue
        prev = arr[max(0, k - lookback):k]
        prev = prev[~np.isnan(prev)]
        if len(prev) and prev.max() >= arr[k]:
            continue
        out[k] = 1
    return out
