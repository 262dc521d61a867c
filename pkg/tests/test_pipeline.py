import csv
import json
from dataclasses import replace
from datetime import datetime

import numpy as np
import pytest

from resi.baselines import round_half_up
from resi.entropy import aggregate_resi
from resi.evaluation import prec
from resi.pipeline import (ConfigError, InputError, RunConfig, config_from_dict, expand_inputs,
                           run_pipeline, write_outputs)
from resi.synth import figure1_scenario, generate


@pytest.fixture(scope="module")
def fig1():
    spec = figure1_scenario()
    cfg = RunConfig(universe=spec.universe, t_start=spec.t0, t_end=spec.t_end)
    return cfg, generate(spec)


@pytest.fixture(scope="module")
def result(fig1):
    cfg, ev = fig1
    return run_pipeline(cfg, ev)


def test_shapes(result):
    assert len(result.cells) == 2
    assert result.hr_sat.shape == result.counts.shape == (2, 192)
    assert result.report is not None and len(result.report.scores) == 2


def test_figure1_alarm_months(result):
    on = [f"{w.start:%Y-%m}" for w, v in zip(result.windows, result.hr_sat[0]) if v > 0]
    assert on[0] == "1995-06" and on[-1] == "1996-12" and len(on) == 19
    for p, v in zip(result.series[1], result.hr_sat[1]):
        assert v == 0 or v == p.hr


def test_counts_match_the_events(fig1, result):
    assert result.counts.sum() == len(fig1[1])


def test_universe_series_is_the_weighted_mean(result):
    for k in (0, 50, 150):
        pairs = [(s[k].p_s, s[k].hr) for s in result.series if not s[k].no_data]
        assert result.universe_hr[k] == pytest.approx(aggregate_resi(pairs))


def test_evaluation_starts(result):
    assert result.report.starts == {"hr_sat": 36, "pi": 48, "ri": 0}
    s = result.report.scores[0]["hr_sat"][12]
    assert s.prec == prec(result.high_hr[0], result.high_act[0], 12, 36)


def test_topn_counts(result):
    for c in range(2):
        m = int(result.high_hr[c, 36:].sum())
        t_hr = 192 - 36
        for arr, high in ((result.pi, result.high_pi), (result.ri, result.high_ri)):
            t_f = int((~np.isnan(arr[c])).sum())
            assert high[c].sum() == min(round_half_up(m * t_f / t_hr), t_f)


def test_exports(tmp_path, fig1, result):
    res = replace(result, cfg=replace(result.cfg, out_dir=tmp_path,
                                      geojson_windows=[datetime(1996, 1, 1)]))
    paths = write_outputs(res)
    names = {p.relative_to(tmp_path).as_posix() for p in paths}
    assert {"resi_series.csv", "alarms.csv", "baselines.csv", "universe.csv", "run_meta.json",
            "report.json", "clusters/clusters_1996-01.geojson"} == names
    with open(tmp_path / "alarms.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["cell_id", "window_start", "hr", "hr_avr", "hr_sat", "activity",
                       "high_hr", "high_activity"]
    assert len(rows) == 1 + 2 * 192
    with open(tmp_path / "baselines.csv") as fh:
        assert next(csv.reader(fh)) == ["cell_id", "window_start", "pi", "ri", "high_pi", "high_ri"]
    gj = json.loads((tmp_path / "clusters" / "clusters_1996-01.geojson").read_text())
    # the plateau holds sixteen bars in the scenario cell plus the background block
    assert sum(f["properties"]["cell_id"] == 0 for f in gj["features"]) == 16
    assert sum(f["properties"]["cell_id"] == 1 for f in gj["features"]) == 1
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["t_s"] == {"hr_sat": 36, "pi": 48, "ri": 0}


def test_geojson_window_outside_period(tmp_path, result):
    res = replace(result, cfg=replace(result.cfg, out_dir=tmp_path,
                                      geojson_windows=[datetime(2010, 1, 1)]))
    with pytest.raises(InputError):
        write_outputs(res)


def test_yearly_run_skips_scoring(fig1):
    cfg, ev = fig1
    res = run_pipeline(replace(cfg, window="year"), ev)
    assert res.hr_sat.shape == (2, 16)
    assert res.report is None and res.pi is None


def test_shared_start(fig1):
    cfg, ev = fig1
    res = run_pipeline(replace(cfg, shared_start=datetime(1990, 1, 1)), ev)
    assert set(res.report.starts.values()) == {84}


def test_validation_lists_every_problem():
    cfg = RunConfig(window="week", mesh=0.3, delta_ts=(12, 48), t_start=datetime(2000, 1, 1),
                    t_end=datetime(1990, 1, 1))
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    text = str(err.value)
    for bit in ("window", "0.3", "delta_t", "precede"):
        assert bit in text


def test_config_from_dict():
    cfg = config_from_dict({"grid": {"universe": "25,125,33,133", "theta_m": 2},
                            "period": {"start": "1990-01", "end": "2000-01"},
                            "alarms": {"gamma": 0.2},
                            "evaluation": {"delta_t": [12]}})
    assert cfg.universe.corners() == (25.0, 125.0, 33.0, 133.0)
    assert cfg.theta_m == 2 and cfg.alarm.gamma == 0.2
    assert cfg.alarm.t0 == datetime(1990, 1, 1)
    assert cfg.delta_ts == (12,)
    with pytest.raises(ConfigError) as err:
        config_from_dict({"grid": {"size": 1}, "bogus": {}})
    assert len(err.value.problems) == 2


def test_missing_inputs(tmp_path):
    with pytest.raises(InputError):
        expand_inputs([str(tmp_path / "nothing*.txt")])
    with pytest.raises(InputError):
        run_pipeline(RunConfig(catalogs=[str(tmp_path / "none.txt")]))
