from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pi_steps
from resi.baselines import (PiConfig, RiConfig, high_topn, moore_neighbours, pi_index, pi_series,
                            ri_from_totals, ri_index, ri_series, round_half_up)
from resi.grid import add_months

T0 = datetime(1983, 1, 1)


def axis(n):
    return [add_months(T0, k) for k in range(n)]


# t0 = month 0, t1 = month 3
TOY = PiConfig(t0=T0, t1=datetime(1983, 4, 1))


def test_pi_toy_map_matches_step_by_step_oracle():
    counts = [[3, 1, 4, 1, 5, 9, 2, 6], [2, 7, 1, 8, 2, 8, 1, 8], [0, 0, 1, 0, 3, 0, 0, 2]]
    got = pi_series(np.array(counts), TOY, axis(8))
    assert np.isnan(got[:, :4]).all()
    for t in range(4, 8):
        ref = pi_steps(counts, 0, 3, t)
        assert np.max(np.abs(got[:, t] - ref)) < 1e-9
        assert np.allclose(pi_index(np.array(counts), TOY, t, axis(8)), ref, atol=1e-9)


def test_pi_two_cells():
    counts = [[1, 2, 1, 2, 6, 6], [2, 1, 2, 1, 1, 1]]
    got = pi_series(np.array(counts), TOY, axis(6))
    for t in (4, 5):
        assert got[:, t] == pytest.approx(pi_steps(counts, 0, 3, t), abs=1e-9)
    # with two cells the centred squares cancel
    assert got[:, 5].sum() == pytest.approx(0.0, abs=1e-12)


def test_pi_tb_step():
    cfg = PiConfig(t0=T0, t1=datetime(1983, 5, 1), tb_step=2)
    rng = np.random.default_rng(5)
    counts = rng.integers(0, 9, (4, 10))
    got = pi_series(counts, cfg, axis(10))
    for t in range(5, 10):
        assert np.allclose(got[:, t], pi_steps(counts.tolist(), 0, 4, t, 2), atol=1e-9)


def test_pi_is_zero_without_change():
    counts = np.tile([[4], [1], [2]], (1, 10))
    got = pi_series(counts, TOY, axis(10))
    assert np.allclose(got[:, 4:], 0.0, atol=1e-12)


def test_pi_concentrated_change():
    # a flat map, so the reference z-scores are all zero
    counts = np.full((5, 12), 3.0)
    counts[2, 4:] += 20
    got = pi_series(counts, TOY, axis(12))
    assert all(np.argmax(got[:, t]) == 2 for t in range(4, 12))
    assert all(got[2, t] > np.delete(got[:, t], 2).max() for t in range(4, 12))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 50))
def test_pi_translation_invariance(seed, shift):
    counts = np.random.default_rng(seed).integers(0, 10, (6, 12))
    a = pi_series(counts, TOY, axis(12))
    b = pi_series(counts + shift, TOY, axis(12))
    # adding to every cell moves every rate equally, so z-scores stay put
    assert np.allclose(a[:, 4:], b[:, 4:], atol=1e-9)


def test_pi_before_t1_is_rejected():
    with pytest.raises(ValueError):
        pi_index(np.ones((2, 6)), TOY, 3, axis(6))
    with pytest.raises(ValueError):
        PiConfig(t0=T0, t1=T0)


def test_moore_neighbourhoods():
    nb = moore_neighbours((6, 6))
    assert sorted(nb[0]) == [0, 1, 6, 7]
    assert len(nb[5]) == 4 and len(nb[3]) == 6
    assert sorted(nb[14]) == [7, 8, 9, 13, 14, 15, 19, 20, 21]


def test_ri_uniform():
    ri = ri_from_totals(np.full(36, 5.0), (6, 6))
    assert np.allclose(ri, 1 / 36)


def test_ri_single_interior_cell():
    totals = np.zeros(36)
    totals[14] = 90
    ri = ri_from_totals(totals, (6, 6))
    nb = moore_neighbours((6, 6))
    raw = np.array([totals[n].mean() for n in nb])
    assert np.allclose(ri, raw / raw.sum(), atol=1e-15)
    assert set(np.flatnonzero(ri)) == {7, 8, 9, 13, 14, 15, 19, 20, 21}
    # edge cells average over fewer neighbours, so they weigh more
    totals = np.zeros(36)
    totals[0] = 12
    ri = ri_from_totals(totals, (6, 6))
    assert ri[0] == pytest.approx(3 / (3 + 2 + 2 + 12 / 9))


def test_ri_undefined_without_events():
    assert ri_from_totals(np.zeros(36), (6, 6)) is None


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_ri_series_sums_to_one_and_uses_the_past_only(seed):
    rng = np.random.default_rng(seed)
    counts = rng.poisson(0.4, (36, 20))
    got = ri_series(counts, RiConfig(), axis(20), (6, 6))
    assert np.isnan(got[:, 0]).all()
    for t in range(1, 20):
        ref = ri_from_totals(counts[:, :t].sum(axis=1), (6, 6))
        if ref is None:
            assert np.isnan(got[:, t]).all()
        else:
            assert abs(got[:, t].sum() - 1.0) < 1e-12
            assert np.allclose(got[:, t], ref, atol=1e-14)
            assert np.allclose(ri_index(counts, RiConfig(), t, axis(20), (6, 6)), ref)


def test_ri_shape_mismatch():
    with pytest.raises(ValueError):
        ri_series(np.zeros((35, 4)), RiConfig(), axis(4), (6, 6))


@pytest.mark.parametrize("x,n", [(2.5, 3), (2.49, 2), (0.5, 1), (0.0, 0), (3.0, 3)])
def test_round_half_up(x, n):
    assert round_half_up(x) == n


def test_topn_picks_largest():
    v = [0.1, 0.9, 0.3, 0.8, 0.2, 0.7]
    assert high_topn(v, 3, 10, 10) == [0, 1, 0, 1, 0, 1]
    assert high_topn(v, 0, 10, 10) == [0] * 6


def test_topn_ties_go_to_the_earlier_time():
    assert high_topn([0.5, 0.9, 0.5, 0.5], 2, 1, 1) == [1, 1, 0, 0]


def test_topn_scales_and_skips_undefined():
    v = [np.nan, np.nan, 0.4, 0.1, 0.3, 0.2]
    # n = round(2 * 4 / 3) = 3
    assert high_topn(v, 2, 4, 3) == [0, 0, 1, 0, 1, 1]
    assert high_topn(v, 50, 1, 1) == [0, 0, 1, 1, 1, 1]


def test_topn_rejects_bad_periods():
    with pytest.raises(ValueError):
        high_topn([1.0], -1, 1, 1)
    with pytest.raises(ValueError):
        high_topn([1.0], 1, 0, 1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.one_of(st.just(float("nan")), st.floats(-5, 5, allow_nan=False)), max_size=60),
       st.integers(0, 30), st.integers(1, 400), st.integers(1, 400))
def test_topn_flags_exactly_n(values, m, t_f, t_hr):
    out = high_topn(values, m, t_f, t_hr)
    defined = sum(not np.isnan(v) for v in values)
    assert sum(out) == min(round_half_up(m * t_f / t_hr), defined)
