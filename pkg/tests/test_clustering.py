import json
import random
from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bfs_components
from resi.clustering import (cluster_probabilities, dump_geojson, make_clusters, mesh_polygon,
                             to_geojson)
from resi.grid import GridSpec, MeshWindowCounts, Region, TimeWindow

CELL = Region(25.0, 125.0, 4.0, 4.0)
WIN = TimeWindow(datetime(2000, 1, 1))


def counts_of(d, region_total=None, universe_total=None):
    n = sum(d.values())
    return MeshWindowCounts(CELL, WIN, dict(d), region_total or n, universe_total or region_total or n)


@pytest.mark.parametrize("msh,n", [
    (set(), 0),
    ({(0, 0)}, 1),
    ({(0, 0), (1, 1)}, 1),
    ({(0, 0), (0, 2)}, 2),
    ({(0, 0), (2, 0)}, 2),
    ({(0, 0), (0, 1), (0, 2), (5, 5), (6, 6), (7, 5)}, 2),
])
def test_small_partitions(msh, n):
    assert len(make_clusters(msh)) == n


def test_labels_cover_every_mesh_once():
    msh = {(0, 0), (1, 1), (3, 3), (3, 4), (10, 0)}
    p = make_clusters(msh)
    assert set(p.labels) == msh
    assert sorted(p.labels[m] for m in msh) == [0, 0, 1, 1, 2]
    assert frozenset().union(*p.clusters) == msh


def test_no_wraparound_between_rows():
    # (0, 39) and (1, 0) are far apart on the grid even if flattened keys are adjacent
    assert len(make_clusters({(0, 39), (1, 0)})) == 2
    assert len(make_clusters({(0, 5), (1, 0), (0, 0)})) == 2


_grids = st.sets(st.tuples(st.integers(0, 20), st.integers(0, 20)), max_size=200)


@settings(max_examples=200, deadline=None)
@given(_grids, st.integers(0, 2**32 - 1))
def test_matches_bfs_and_ignores_seed_order(msh, seed):
    p = make_clusters(msh, random.Random(seed))
    assert p.as_sets() == bfs_components(msh)
    assert make_clusters(msh).clusters == p.clusters  # canonical labels too


@settings(max_examples=100, deadline=None)
@given(_grids)
def test_gap_property(msh):
    p = make_clusters(msh)
    for a, ca in enumerate(p.clusters):
        halo = {(i + di, j + dj) for i, j in ca for di in (-1, 0, 1) for dj in (-1, 0, 1)}
        for b, cb in enumerate(p.clusters):
            if a != b:
                assert not (halo & cb)


def test_matches_scipy_labelling():
    ndimage = pytest.importorskip("scipy.ndimage")
    rng = np.random.default_rng(11)
    for _ in range(20):
        occ = rng.random((64, 64)) < 0.3
        labels, n = ndimage.label(occ, structure=np.ones((3, 3)))
        msh = set(zip(*np.nonzero(occ)))
        p = make_clusters({(int(i), int(j)) for i, j in msh})
        assert len(p) == n


def test_single_cluster_takes_all():
    c = counts_of({(0, 0): 4, (0, 1): 6})
    probs = cluster_probabilities(make_clusters({(0, 0), (0, 1)}), c)
    assert probs.conditional == [1.0]
    assert probs.residual == 0.0


def test_exact_fractions():
    c = counts_of({(0, 0): 2, (5, 5): 6})
    probs = cluster_probabilities(make_clusters({(0, 0), (5, 5)}), c)
    assert probs.conditional == [0.25, 0.75]
    assert probs.counts == [2, 6]


def test_events_outside_clusters_leave_residual_mass():
    c = counts_of({(0, 0): 2, (5, 5): 1}, universe_total=12)
    probs = cluster_probabilities(make_clusters({(0, 0)}), c)
    assert probs.conditional == [2 / 3]
    assert probs.joint == [2 / 12]
    assert probs.residual == pytest.approx(1 / 3)
    assert probs.p_region == 3 / 12


def test_no_events_is_no_data():
    assert cluster_probabilities(make_clusters(set()), counts_of({}, 0, 0)) is None


def test_probabilities_match_recount():
    rng = np.random.default_rng(2)
    d = {(int(i), int(j)): int(k) for i, j, k in
         zip(rng.integers(0, 40, 300), rng.integers(0, 40, 300), rng.integers(1, 6, 300))}
    c = counts_of(d, universe_total=sum(d.values()) * 3)
    msh = {m for m, k in d.items() if k > 1}
    part = make_clusters(msh)
    probs = cluster_probabilities(part, c)
    for comp, p in zip(part.clusters, probs.conditional):
        assert p == sum(d[m] for m in comp) / sum(d.values())
    assert sum(probs.counts) == sum(d[m] for m in msh)


def test_geojson_export(tmp_path):
    c = counts_of({(0, 0): 3, (0, 1): 2, (3, 3): 2})
    part = make_clusters({(0, 0), (0, 1), (3, 3)})
    fc = to_geojson(part, CELL, GridSpec(), c)
    assert [f["properties"]["cluster_id"] for f in fc["features"]] == [0, 1]
    assert [f["properties"]["event_count"] for f in fc["features"]] == [5, 2]
    assert len(fc["features"][0]["geometry"]["coordinates"]) == 2
    assert mesh_polygon((0, 0), CELL, GridSpec())[:3] == [[125.0, 25.0], [125.1, 25.0], [125.1, 25.1]]
    p = tmp_path / "c.geojson"
    dump_geojson(fc, p)
    assert json.loads(p.read_text()) == fc
