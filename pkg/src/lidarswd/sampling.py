"""Farthest point sampling, k-nearest neighbours and inverse-distance interpolation.

Neighbour queries are exact: results equal a full quadratic scan ordered by
``(distance, index)``. A k-d tree proposes candidates; any query whose
candidate list cannot prove the k-th neighbour falls back to a full scan.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._parallel import resolve_threads
from .core import InvalidInputError, InvalidParameterError, as_cloud

COINCIDENT = 1e-12
# extra candidates fetched beyond k so that ties at the boundary are usually resolved without a rescan
_SLACK = 8


def _dist_to(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = points - q
    return np.sqrt((d * d).sum(axis=-1))


@dataclass(frozen=True)
class NeighborGraph:
    """``indices[q, r]`` is the r-th nearest neighbour of query ``q``; distances ascend."""

    indices: np.ndarray
    distances: np.ndarray

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("query", "rank", "neighbor", "distance"))
        for q in range(self.indices.shape[0]):
            for r in range(self.k):
                w.writerow((q, r, int(self.indices[q, r]), repr(float(self.distances[q, r]))))
        return buf.getvalue()


def farthest_point_sample(cloud, m: int, seed_index: int = 0, return_distances: bool = False):
    """Greedy farthest point sampling.

    Starts at ``seed_index``; every next pick maximizes the distance to the
    already selected set, lowest index on ties. With ``return_distances`` the
    second return value holds each pick's distance to the set before it was
    added (``inf`` for the seed).
    """
    pts = as_cloud(cloud)
    n = pts.shape[0]
    m = int(m)
    if not 1 <= m <= n:
        raise InvalidParameterError(f"m must be in [1, {n}], got {m}")
    if not 0 <= seed_index < n:
        raise InvalidParameterError(f"seed_index must be in [0, {n}), got {seed_index}")
    picks = np.empty(m, dtype=np.intp)
    gaps = np.empty(m)
    picks[0] = seed_index
    gaps[0] = np.inf
    min_d = _dist_to(pts, pts[seed_index])
    min_d[seed_index] = -1.0
    for t in range(1, m):
        j = int(np.argmax(min_d))
        picks[t] = j
        gaps[t] = min_d[j]
        np.minimum(min_d, _dist_to(pts, pts[j]), out=min_d)
        min_d[j] = -1.0
    if return_distances:
        return picks, gaps
    return picks


def _scan(sources, q, k, exclude):
    d = _dist_to(sources, q)
    order = np.argsort(d, kind="stable")
    if exclude is not None:
        order = order[order != exclude]
    order = order[:k]
    return order, d[order]


def k_nearest(sources, queries, k: int, exclude_self: bool = False, threads: int | None = None):
    """Exact k nearest ``sources`` for every query, ``(distance, index)`` ordered.

    With ``exclude_self`` the queries must be the sources themselves and query
    ``i`` never lists index ``i``.
    """
    src = as_cloud(sources, "sources")
    qs = as_cloud(queries, "queries")
    n = src.shape[0]
    need = k + (1 if exclude_self else 0)
    if need > n:
        raise InvalidParameterError(f"k={k} too large for {n} source points")
    idx_out = np.empty((qs.shape[0], k), dtype=np.intp)
    dist_out = np.empty((qs.shape[0], k))

    kc = min(n, need + _SLACK)
    tree_d, tree_i = cKDTree(src).query(qs, k=kc, workers=resolve_threads(threads))
    tree_d = tree_d.reshape(qs.shape[0], kc)
    tree_i = tree_i.reshape(qs.shape[0], kc)
    for q in range(qs.shape[0]):
        exclude = q if exclude_self else None
        cand = tree_i[q]
        if exclude is not None:
            cand = cand[cand != exclude]
        d = _dist_to(src[cand], qs[q])
        order = np.lexsort((cand, d))[:k]
        sel, sel_d = cand[order], d[order]
        # candidates are complete only if nothing outside them can tie or beat the k-th distance
        bound = tree_d[q, -1]
        if kc < n and not sel_d[-1] < bound * (1 - 1e-12):
            sel, sel_d = _scan(src, qs[q], k, exclude)
        idx_out[q] = sel
        dist_out[q] = sel_d
    return idx_out, dist_out


def knn(cloud, k: int, threads: int | None = None) -> NeighborGraph:
    """k nearest other points of every point (self excluded), ties to the lower index."""
    pts = as_cloud(cloud)
    n = pts.shape[0]
    if not 1 <= k < n:
        raise InvalidParameterError(f"k must satisfy 1 <= k < N={n}, got {k}")
    idx, dist = k_nearest(pts, pts, k, exclude_self=True, threads=threads)
    return NeighborGraph(idx, dist)


def inverse_distance_interpolate(sources, features, queries, k: int = 3, power: float = 2.0,
                                 threads: int | None = None) -> np.ndarray:
    """Inverse-distance weighted average of the ``k`` nearest source features.

    Weights are ``1 / d**power``. A query closer than 1e-12 to a source copies
    that source's feature exactly.
    """
    src = as_cloud(sources, "sources")
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim == 1:
        feats = feats[:, None]
    if feats.shape[0] != src.shape[0]:
        raise InvalidInputError(f"features ({feats.shape[0]} rows) not aligned with sources ({src.shape[0]})")
    if not np.all(np.isfinite(feats)):
        raise InvalidInputError("features contain non-finite values")
    qs = as_cloud(queries, "queries")
    if not 1 <= k <= src.shape[0]:
        raise InvalidParameterError(f"k must be in [1, {src.shape[0]}], got {k}")
    idx, dist = k_nearest(src, qs, k, threads=threads)
    out = np.empty((qs.shape[0], feats.shape[1]))
    hit = dist[:, 0] < COINCIDENT
    out[hit] = feats[idx[hit, 0]]
    rest = ~hit
    if rest.any():
        w = 1.0 / dist[rest] ** power
        out[rest] = (w[:, :, None] * feats[idx[rest]]).sum(axis=1) / w.sum(axis=1)[:, None]
    return out
