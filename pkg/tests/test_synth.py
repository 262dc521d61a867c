from datetime import datetime

import numpy as np
import pytest

from resi.catalog import parse_lines, read_csv, to_csv_string, encode_record
from resi.clustering import make_clusters
from resi.grid import GridSpec, Region, bin_events, make_windows, quaking_meshes, tally
from resi.synth import (Phase, ScenarioSpec, designed_cluster_counts, events_from_dict,
                        figure1_scenario, generate, gr_magnitudes, phase_of_month, random_catalog,
                        scenario_from_dict, transition_scenario)

CELL = Region(25.0, 125.0, 4.0, 4.0)


def observed_cluster_counts(spec, events):
    ws = make_windows(spec.t0, spec.t_end)
    return [len(make_clusters(quaking_meshes(c, spec.grid)))
            for c in bin_events(events, spec.universe, spec.grid, ws)]


def test_zero_rates_give_nothing():
    spec = ScenarioSpec((Phase("a", 12, (frozenset({(3, 3)}),), rate=0.0),))
    assert len(generate(spec)) == 0


def test_single_mesh_tally():
    spec = ScenarioSpec((Phase("a", 12, (frozenset({(7, 9)}),), rate=2.0),), seed=3)
    ev = generate(spec)
    ws = make_windows(spec.t0, spec.t_end)
    per_month = [c.counts.get((7, 9), 0) for c in bin_events(ev, CELL, GridSpec(), ws)]
    assert sum(per_month) == len(ev)
    assert tally(ev.to_events(), CELL, GridSpec()) == {(7, 9): len(ev)}
    # replaying the same seed gives the same draw
    assert per_month == [c.counts.get((7, 9), 0)
                         for c in bin_events(generate(spec), CELL, GridSpec(), ws)]
    assert 12 <= len(ev) <= 40


def test_fixed_process_is_exact():
    spec = ScenarioSpec((Phase("a", 5, (frozenset({(1, 1), (1, 2)}),), rate=3),), process="fixed")
    ev = generate(spec)
    assert len(ev) == 5 * 2 * 3
    assert tally(ev.to_events(), CELL, GridSpec()) == {(1, 1): 15, (1, 2): 15}


def test_same_seed_same_bytes():
    a = to_csv_string(generate(transition_scenario(seed=9, months=(4, 4, 4, 4))))
    b = to_csv_string(generate(transition_scenario(seed=9, months=(4, 4, 4, 4))))
    c = to_csv_string(generate(transition_scenario(seed=10, months=(4, 4, 4, 4))))
    assert a == b and a != c


def test_events_are_sorted_and_in_window():
    spec = transition_scenario(seed=1, months=(3, 3, 3, 3))
    ev = generate(spec)
    t = ev.time
    assert (t[1:] >= t[:-1]).all()
    assert t[0] >= np.datetime64(spec.t0) and t[-1] < np.datetime64(spec.t_end)
    assert (ev.mag >= spec.mag_floor).all()


def test_gutenberg_richter_slope():
    m = gr_magnitudes(np.random.default_rng(0), 200_000, 1.0, 2.0)
    assert m.min() >= 2.0
    # each unit of magnitude cuts the count tenfold
    ratio = (m >= 3.0).sum() / (m >= 2.0).sum()
    assert ratio == pytest.approx(0.1, rel=0.05)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec((Phase("a", 2, rate=-1.0),))
    with pytest.raises(ValueError):
        ScenarioSpec((Phase("a", 2, (frozenset({(40, 0)}),)),))
    with pytest.raises(ValueError):
        ScenarioSpec((Phase("a", 2, rate=2.5),), process="fixed")
    with pytest.raises(ValueError):
        ScenarioSpec((Phase("a", 2),), process="hawkes")


def _match_rate(seed, rate):
    spec = transition_scenario(seed=seed, rate=rate)
    got = observed_cluster_counts(spec, generate(spec))
    want = designed_cluster_counts(spec)
    assert len(got) == len(want) == spec.n_months
    return np.mean(np.array(got) == np.array(want))


def test_transition_trajectory_follows_the_design():
    # at 3 events per mesh a quiet rim mesh now and then strands a one-mesh
    # fragment, so the share is pooled over seeds
    assert np.mean([_match_rate(seed, 3.0) for seed in range(10)]) >= 0.95
    assert min(_match_rate(seed, 5.0) for seed in range(5)) >= 0.95


def test_transition_phases():
    spec = transition_scenario(months=(2, 3, 4, 5))
    assert phase_of_month(spec) == ["a"] * 2 + ["c"] * 3 + ["d"] * 4 + ["e"] * 5
    want = designed_cluster_counts(spec)
    assert want[0] == 1 and want[2] == 2 and want[-1] == 1


def test_figure1_scenario_shape():
    spec = figure1_scenario()
    assert spec.t0 == datetime(1983, 1, 1)
    assert spec.n_months == 24 + 108 + 3 * 3 + 27 + 24
    got = observed_cluster_counts(spec, generate(spec))
    assert got == designed_cluster_counts(spec)


def test_round_trip_through_jma_and_csv(tmp_path):
    ev = generate(transition_scenario(seed=2, months=(2, 2, 2, 2)))
    lines = [encode_record(e) for e in ev.to_events()]
    back = parse_lines(lines)
    assert back.n_rejected == 0
    assert [encode_record(e) for e in back.events] == lines
    p = tmp_path / "s.csv"
    p.write_text(to_csv_string(ev))
    assert to_csv_string(read_csv(p)) == p.read_text()


def test_random_catalog():
    uni = Region.from_corners(25, 125, 49, 149)
    ev = random_catalog(5000, uni, datetime(1983, 1, 1), 24, seed=1)
    assert len(ev) == 5000
    assert (ev.lat >= 25).all() and (ev.lat < 49).all()
    assert (ev.lon >= 125).all() and (ev.lon < 149).all()
    again = random_catalog(5000, uni, datetime(1983, 1, 1), 24, seed=1)
    assert to_csv_string(ev) == to_csv_string(again)


def test_scenario_tables():
    assert scenario_from_dict({"preset": "figure1"}).n_months == figure1_scenario().n_months
    kind, kw = scenario_from_dict({"preset": "random", "n_events": 10, "months": 3})
    assert kind == "random" and kw["n_events"] == 10
    spec = scenario_from_dict({"phases": [
        {"name": "a", "months": 3, "rate": 2, "clusters": [[[0, 0, 2, 2]]]},
        {"name": "c", "months": 2, "rate": 2, "clusters": [[[0, 0, 2, 2]], [[5, 5, 6, 6]]]},
    ], "process": "fixed", "seed": 4})
    assert designed_cluster_counts(spec) == [1, 1, 1, 2, 2]
    ev, uni, t0, t_end = events_from_dict({"preset": "transition", "seed": 1})
    assert len(ev) > 0 and t0 == datetime(1983, 1, 1) and t_end > t0
    with pytest.raises(ValueError):
        scenario_from_dict({"preset": "nope"})
    with pytest.raises(ValueError):
        scenario_from_dict({})
