"""Clusters of quaking meshes.

Two meshes belong to the same cluster when they touch through an edge or a
vertex, transitively. Any gap one mesh wide or wider separates clusters.
"""

from __future__ import annotations

import gc
import itertools
import json
import random
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from resi.grid import GridSpec, MeshWindowCounts, Region


@dataclass(frozen=True)
class ClusterPartition:
    """Partition of ``Msh(S)`` into 8-connected clusters.

    Clusters are ordered by their smallest mesh index, so the labels do not
    depend on the order in which seeds were drawn.
    """

    clusters: list = field(default_factory=list)
    labels: dict = field(default_factory=dict)
    event_counts: list | None = None

    def __len__(self) -> int:
        return len(self.clusters)

    def with_counts(self, counts: MeshWindowCounts) -> "ClusterPartition":
        sums = [sum(counts.count(m) for m in c) for c in self.clusters]
        return ClusterPartition(self.clusters, self.labels, sums)

    def as_sets(self) -> set:
        return {frozenset(c) for c in self.clusters}


def make_clusters(msh: Iterable, rng: random.Random | None = None) -> ClusterPartition:
    """Grow clusters from seed meshes until every quaking mesh is covered.

    A seed is taken from the meshes not yet in any cluster, and each
    member is extended by absorbing the unclaimed quaking meshes among its
    eight surrounding meshes. Each mesh is claimed once and extended once,
    so the cost is linear in ``len(msh)``.

    Args:
        msh: mesh indices ``(i, j)`` of the quaking meshes.
        rng: when given, seeds are drawn in random order. The partition is
            the same for every order.
    """
    meshes = msh if isinstance(msh, (set, frozenset)) else set(msh)
    if not meshes:
        return ClusterPartition([], {}, None)
    # the output is many small acyclic objects; cyclic GC passes over them
    # only add superlinear cost
    gc_was_on = gc.isenabled()
    gc.disable()
    try:
        return _grow(meshes, rng)
    finally:
        if gc_was_on:
            gc.enable()


def _grow(meshes, rng) -> ClusterPartition:
    n = len(meshes)
    ij = np.fromiter(itertools.chain.from_iterable(meshes), dtype=np.int64, count=2 * n)
    ij = ij.reshape(n, 2)
    i0, j0 = (int(v) for v in ij.min(axis=0))
    # the extra column keeps j-1 / j+1 from wrapping onto the next row
    stride = int(ij[:, 1].max()) - j0 + 2
    # sorted keys follow (i, j) order and keep the hash tables walked in order
    key_arr = np.sort((ij[:, 0] - i0) * stride + (ij[:, 1] - j0))
    keys = key_arr.tolist()
    unclaimed = set(keys)
    around = (-stride - 1, -stride, -stride + 1, -1, 1, stride - 1, stride, stride + 1)

    seeds = keys
    if rng is not None:
        seeds = list(keys)
        rng.shuffle(seeds)

    groups = []
    for seed in seeds:
        if seed not in unclaimed:
            continue
        unclaimed.discard(seed)
        members = [seed]
        frontier = [seed]
        while frontier:
            m = frontier.pop()
            for off in around:
                q = m + off
                if q in unclaimed:
                    unclaimed.discard(q)
                    members.append(q)
                    frontier.append(q)
        groups.append((min(members), members))

    groups.sort(key=lambda g: g[0])
    pos = dict(zip(keys, zip((key_arr // stride + i0).tolist(), (key_arr % stride + j0).tolist())))
    clusters = [frozenset([pos[k] for k in g]) for _, g in groups]
    labels = {m: n for n, c in enumerate(clusters) for m in c}
    return ClusterPartition(clusters, labels, None)


@dataclass(frozen=True)
class ClusterProbabilities:
    """``p(C|S,t)`` and ``p(C,t)`` for every cluster of one window.

    ``residual`` is the share of the region's events lying outside every
    cluster, i.e. ``1 - sum(conditional)``.
    """

    conditional: list
    joint: list
    counts: list
    quakes_region: int
    quakes_universe: int

    @property
    def p_region(self) -> float:
        return self.quakes_region / self.quakes_universe

    @property
    def residual(self) -> float:
        return (self.quakes_region - sum(self.counts)) / self.quakes_region


def cluster_probabilities(partition: ClusterPartition,
                          counts: MeshWindowCounts) -> ClusterProbabilities | None:
    """Cluster shares of the region's and the universe's events.

    Returns None (no data) when the region has no events in the window.
    """
    if counts.quakes_region == 0:
        return None
    sums = [sum(counts.count(m) for m in c) for c in partition.clusters]
    n_s, n_u = counts.quakes_region, counts.total_in_universe
    return ClusterProbabilities(
        conditional=[c / n_s for c in sums],
        joint=[c / n_u for c in sums],
        counts=sums,
        quakes_region=n_s,
        quakes_universe=n_u,
    )


def mesh_polygon(mesh, region: Region, spec: GridSpec) -> list:
    i, j = mesh
    lat0 = region.x0 + i * spec.dx
    lon0 = region.y0 + j * spec.dy
    lat1, lon1 = lat0 + spec.dx, lon0 + spec.dy
    return [[round(lon0, 6), round(lat0, 6)], [round(lon1, 6), round(lat0, 6)],
            [round(lon1, 6), round(lat1, 6)], [round(lon0, 6), round(lat1, 6)],
            [round(lon0, 6), round(lat0, 6)]]


def to_geojson(partition: ClusterPartition, region: Region, spec: GridSpec,
               counts: MeshWindowCounts | None = None) -> dict:
    """One MultiPolygon feature per cluster, one square per mesh."""
    if counts is not None:
        partition = partition.with_counts(counts)
    features = []
    for cid, cluster in enumerate(partition.clusters):
        props = {"cluster_id": cid, "n_meshes": len(cluster)}
        if partition.event_counts is not None:
            props["event_count"] = partition.event_counts[cid]
        features.append({
            "type": "Feature",
            "properties": props,
            "geometry": {
                "type": "MultiPolygon",
                "coordinates": [[mesh_polygon(m, region, spec)] for m in sorted(cluster)],
            },
        })
    return {"type": "FeatureCollection", "features": features}


def dump_geojson(collection: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(collection, fh, indent=1, sort_keys=True)
        fh.write("\n")
