"""Pattern Informatics (PI) and Relative Intensity (RI) baselines.

Both work on a ``(n_cells, n_months)`` matrix of monthly event counts whose
columns follow ``axis`` (the month starts). Month ``t`` stands for the whole
calendar month starting at ``axis[t]``; month ranges include both ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PiConfig:
    t0: datetime = datetime(1983, 1, 1)
    t1: datetime = datetime(1987, 1, 1)
    cutoff: float = 2.0
    tb_step: int = 1  # months between reference times t_b

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ValueError("PI needs t0 < t1")
        if self.tb_step < 1:
            raise ValueError("tb_step must be >= 1")


@dataclass(frozen=True)
class RiConfig:
    t0: datetime = datetime(1983, 1, 1)
    cutoff: float = 2.0


def _index(axis: Sequence[datetime], when: datetime) -> int:
    for k, a in enumerate(axis):
        if (a.year, a.month) == (when.year, when.month):
            return k
    raise KeyError(f"{when:%Y-%m} not on the time axis")


def _normalize(rates: np.ndarray) -> np.ndarray:
    """Subtract the cross-cell mean and divide by the cross-cell stdev (last axis).

    A map with no spread normalizes to zeros.
    """
    mu = rates.mean(axis=-1, keepdims=True)
    sd = rates.std(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(sd > 0, (rates - mu) / np.where(sd > 0, sd, 1.0), 0.0)
    return out


def pi_series(cell_freqs: np.ndarray, cfg: PiConfig, axis: Sequence[datetime]) -> np.ndarray:
    """PI for every cell and month; NaN where undefined (``t <= t1``).

    For each reference time ``t_b`` in ``[t0, t1]``: the mean monthly count
    of every cell over ``[t_b, t]`` is normalized across cells into
    ``I_i(t_b, t)``; ``dI_i = I_i(t_b, t) - I_i(t_b, t1)`` is averaged over
    ``t_b``, squared, and the map-wide mean of the squares is subtracted.
    """
    counts = np.asarray(cell_freqs, dtype=float)
    n_cells, n_t = counts.shape
    a, b = _index(axis, cfg.t0), _index(axis, cfg.t1)
    out = np.full((n_cells, n_t), np.nan)
    if n_cells == 0 or b + 1 >= n_t:
        return out
    csum = np.concatenate([np.zeros((n_cells, 1)), np.cumsum(counts, axis=1)], axis=1)
    tb = np.arange(a, b + 1, cfg.tb_step)

    def norm_rates(t):
        # rows: t_b, columns: cells
        totals = (csum[:, t + 1][None, :] - csum[:, tb].T)
        return _normalize(totals / (t - tb + 1)[:, None])

    ref = norm_rates(b)
    for t in range(b + 1, n_t):
        d = (norm_rates(t) - ref).mean(axis=0)
        sq = d * d
        out[:, t] = sq - sq.mean()
    return out


def pi_index(cell_freqs: np.ndarray, cfg: PiConfig, t: int, axis: Sequence[datetime]) -> np.ndarray:
    """PI of every cell at month index ``t`` (must be after ``t1``)."""
    if t <= _index(axis, cfg.t1):
        raise ValueError("PI is defined only after t1")
    return pi_series(np.asarray(cell_freqs)[:, :t + 1], cfg, list(axis)[:t + 1])[:, t]


def moore_neighbours(shape: tuple[int, int]) -> list[list[int]]:
    """Cell ids of each cell plus its existing edge/vertex neighbours."""
    n_rows, n_cols = shape
    out = []
    for r in range(n_rows):
        for c in range(n_cols):
            out.append([rr * n_cols + cc
                        for rr in range(max(0, r - 1), min(n_rows, r + 2))
                        for cc in range(max(0, c - 1), min(n_cols, c + 2))])
    return out


def ri_from_totals(totals: np.ndarray, shape: tuple[int, int]) -> np.ndarray | None:
    """Neighbourhood-mean counts normalized to sum to one; None if all zero."""
    totals = np.asarray(totals, dtype=float)
    n = np.array([totals[nb].mean() for nb in moore_neighbours(shape)])
    s = n.sum()
    if s <= 0:
        return None
    return n / s


def ri_series(cell_counts: np.ndarray, cfg: RiConfig, axis: Sequence[datetime],
              shape: tuple[int, int]) -> np.ndarray:
    """RI for every cell and month from the counts in ``[t0, t - 1]``; NaN if undefined."""
    counts = np.asarray(cell_counts, dtype=float)
    n_cells, n_t = counts.shape
    if n_cells != shape[0] * shape[1]:
        raise ValueError("cell count does not match the grid shape")
    a = _index(axis, cfg.t0)
    out = np.full((n_cells, n_t), np.nan)
    nbrs = moore_neighbours(shape)
    # neighbourhood means as a sparse averaging matrix
    avg = np.zeros((n_cells, n_cells))
    for i, nb in enumerate(nbrs):
        avg[i, nb] = 1.0 / len(nb)
    running = np.zeros(n_cells)
    for t in range(a + 1, n_t):
        running += counts[:, t - 1]
        n = avg @ running
        s = n.sum()
        if s > 0:
            out[:, t] = n / s
    return out


def ri_index(cell_counts: np.ndarray, cfg: RiConfig, t: int, axis: Sequence[datetime],
             shape: tuple[int, int]) -> np.ndarray | None:
    a = _index(axis, cfg.t0)
    if t <= a:
        raise ValueError("RI is defined only after t0")
    return ri_from_totals(np.asarray(cell_counts)[:, a:t].sum(axis=1), shape)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def high_topn(values: Sequence[float], m: int, t_f: float, t_hr: float) -> list[int]:
    """Flag the ``n = round(m * t_f / t_hr)`` largest defined values.

    NaN marks undefined times, which are never flagged. Ties go to the
    earlier time.
    """
    if m < 0 or t_f <= 0 or t_hr <= 0:
        raise ValueError("need m >= 0 and positive period lengths")
    arr = np.asarray(values, dtype=float)
    n = round_half_up(m * t_f / t_hr)
    out = [0] * len(arr)
    idx = np.flatnonzero(~np.isnan(arr))
    if n <= 0 or len(idx) == 0:
        return out
    # stable sort on -value keeps earlier times first among equals
    order = idx[np.argsort(-arr[idx], kind="stable")]
    for k in order[:n]:
        out[int(k)] = 1
    return out
