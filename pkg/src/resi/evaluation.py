"""Precedence/delay scoring of alarm series against activity peaks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

DELTA_TS = (12, 24, 36)


def unit(x: float) -> int:
    return 1 if x > 0 else 0


def _as01(series) -> np.ndarray:
    return (np.asarray(series, dtype=float) > 0).astype(np.int64)


def prec(f, g, delta_t: int, t_s: int = 0, t_e: int | None = None) -> float | None:
    """Share of ``f`` alarms followed by a ``g`` positive within ``delta_t`` steps.

    Sums run over ``t = t_s .. t_e - delta_t`` (``t_e`` defaults to the last
    index). None when ``f`` has no positive time in that range.
    """
    f, g = _as01(f), _as01(g)
    t_e = len(f) - 1 if t_e is None else t_e
    hi = t_e - delta_t
    if delta_t < 1 or hi < t_s:
        return None
    # ahead[t] = sum of g over (t, t + delta_t]
    c = np.concatenate([[0], np.cumsum(g)])
    ts = np.arange(t_s, hi + 1)
    ahead = c[ts + delta_t + 1] - c[ts + 1]
    den = int(f[ts].sum())
    if den == 0:
        return None
    return int(((f[ts] * ahead) > 0).sum()) / den


def delay(g, f, delta_t: int, t_s: int = 0, t_e: int | None = None) -> float | None:
    """Share of ``g`` positives preceded by an ``f`` positive within ``delta_t`` steps.

    Sums run over ``t = t_s + delta_t .. t_e``. None when ``g`` has no
    positive time in that range.
    """
    f, g = _as01(f), _as01(g)
    t_e = len(g) - 1 if t_e is None else t_e
    lo = t_s + delta_t
    if delta_t < 1 or t_e < lo:
        return None
    c = np.concatenate([[0], np.cumsum(f)])
    ts = np.arange(lo, t_e + 1)
    behind = c[ts] - c[ts - delta_t]
    den = int(g[ts].sum())
    if den == 0:
        return None
    return int(((g[ts] * behind) > 0).sum()) / den


def _greater(a, b) -> bool | None:
    if a is None or b is None:
        return None
    return a > b


def condition_a(f, activity_high, delta_t: int, t_s: int = 0, t_e: int | None = None) -> bool | None:
    """``prec(f, activity) > prec(random, activity)``; None if not evaluable."""
    ones = np.ones(len(activity_high))
    return _greater(prec(f, activity_high, delta_t, t_s, t_e),
                    prec(ones, activity_high, delta_t, t_s, t_e))


def condition_b(f, activity_high, delta_t: int, t_s: int = 0, t_e: int | None = None) -> bool | None:
    """``delay(activity, f) > delay(random, f)``; None if not evaluable."""
    ones = np.ones(len(activity_high))
    return _greater(delay(activity_high, f, delta_t, t_s, t_e),
                    delay(ones, f, delta_t, t_s, t_e))


def active_cells(counts: np.ndarray) -> np.ndarray:
    """Cells whose mean monthly count is at least one.

    ``counts`` has shape ``(n_cells, n_months)``.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0 or counts.shape[1] == 0:
        return np.zeros(len(counts), dtype=bool)
    return counts.mean(axis=1) >= 1.0


@dataclass(frozen=True)
class Score:
    prec: float | None
    delay: float | None
    prec_random: float | None
    delay_random: float | None

    @property
    def condition_a(self) -> bool | None:
        return _greater(self.prec, self.prec_random)

    @property
    def condition_b(self) -> bool | None:
        return _greater(self.delay, self.delay_random)

    def as_dict(self) -> dict:
        return {"prec": self.prec, "delay": self.delay,
                "prec_random": self.prec_random, "delay_random": self.delay_random,
                "condition_a": self.condition_a, "condition_b": self.condition_b}


def score(f, activity_high, delta_t: int, t_s: int = 0, t_e: int | None = None) -> Score:
    ones = np.ones(len(activity_high))
    return Score(prec(f, activity_high, delta_t, t_s, t_e),
                 delay(activity_high, f, delta_t, t_s, t_e),
                 prec(ones, activity_high, delta_t, t_s, t_e),
                 delay(ones, f, delta_t, t_s, t_e))


@dataclass
class EvalReport:
    """``scores[cell][function][delta_t]`` plus the active-cell flags."""

    scores: dict = field(default_factory=dict)
    active: list = field(default_factory=list)
    starts: dict = field(default_factory=dict)
    delta_ts: tuple = DELTA_TS

    @property
    def functions(self) -> list[str]:
        first = next(iter(self.scores.values()), {})
        return list(first)

    def summary(self, active_only: bool = False) -> dict:
        """Counts of cells satisfying each condition, per function and delta_t."""
        out: dict = {}
        for fn in self.functions:
            out[fn] = {}
            for dt in self.delta_ts:
                a = b = 0
                for cell, per_fn in self.scores.items():
                    if active_only and not self.active[cell]:
                        continue
                    s = per_fn[fn][dt]
                    a += s.condition_a is True
                    b += s.condition_b is True
                out[fn][dt] = {"condition_a": a, "condition_b": b}
        return out

    def to_dict(self) -> dict:
        return {
            "delta_t": list(self.delta_ts),
            "t_s": dict(self.starts),
            "active_cells": [c for c, ok in enumerate(self.active) if ok],
            "cells": {
                str(cell): {fn: {str(dt): s.as_dict() for dt, s in per_dt.items()}
                            for fn, per_dt in per_fn.items()}
                for cell, per_fn in self.scores.items()
            },
            "summary": {fn: {str(dt): v for dt, v in d.items()}
                        for fn, d in self.summary().items()},
            "summary_active": {fn: {str(dt): v for dt, v in d.items()}
                               for fn, d in self.summary(active_only=True).items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        cells = d["cells"]
        n = max([int(c) for c in cells] + [-1]) + 1
        active_ids = set(d.get("active_cells", []))
        scores = {}
        for c, per_fn in cells.items():
            scores[int(c)] = {
                fn: {int(dt): Score(v["prec"], v["delay"], v["prec_random"], v["delay_random"])
                     for dt, v in per_dt.items()}
                for fn, per_dt in per_fn.items()
            }
        return cls(scores, [c in active_ids for c in range(n)], dict(d.get("t_s", {})),
                   tuple(d.get("delta_t", DELTA_TS)))


def evaluate_all(alarms: Mapping[str, np.ndarray], high_act: np.ndarray, counts: np.ndarray,
                 starts: Mapping[str, int], delta_ts: Sequence[int] = DELTA_TS,
                 shared_start: int | None = None) -> EvalReport:
    """Score every alarm function in every cell.

    Args:
        alarms: function name -> ``(n_cells, n_t)`` binary alarm matrix.
        high_act: ``(n_cells, n_t)`` binary activity-peak matrix.
        counts: ``(n_cells, n_t)`` monthly counts, for the active-cell flags.
        starts: function name -> first index of its defined period (``t_s``).
        shared_start: when given, every function is scored from this index.
    """
    if any(dt > 36 for dt in delta_ts):
        raise ValueError("delta_t beyond 36 months is not evaluated")
    high_act = np.asarray(high_act)
    n_cells = high_act.shape[0] if high_act.ndim == 2 else 0
    report = EvalReport(active=[bool(x) for x in active_cells(counts)] if n_cells else [],
                        delta_ts=tuple(delta_ts))
    for name in alarms:
        report.starts[name] = int(starts[name] if shared_start is None else shared_start)
    for cell in range(n_cells):
        report.scores[cell] = {
            name: {dt: score(f[cell], high_act[cell], dt, report.starts[name]) for dt in delta_ts}
            for name, f in alarms.items()
        }
    return report
