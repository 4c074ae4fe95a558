"""Nearest-neighbour metrics: Chamfer and Hausdorff, plus the Chamfer gradient."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .._parallel import resolve_threads
from ..core import as_cloud


def nearest(queries: np.ndarray, reference: np.ndarray, threads: int | None = None):
    """Distance and index of the nearest ``reference`` point for every query."""
    tree = cKDTree(reference)
    dist, idx = tree.query(queries, k=1, workers=resolve_threads(threads))
    return dist, idx


def chamfer(X, Y, threads: int | None = None) -> float:
    """Symmetric Chamfer distance with squared nearest-neighbour distances.

    ``mean_x min_y |x-y|^2 + mean_y min_x |x-y|^2``
    """
    X = as_cloud(X, "X")
    Y = as_cloud(Y, "Y")
    d_xy, _ = nearest(X, Y, threads)
    d_yx, _ = nearest(Y, X, threads)
    return float(np.mean(d_xy * d_xy) + np.mean(d_yx * d_yx))


def hausdorff(X, Y, threads: int | None = None) -> float:
    """Symmetric Hausdorff distance (unsquared)."""
    X = as_cloud(X, "X")
    Y = as_cloud(Y, "Y")
    d_xy, _ = nearest(X, Y, threads)
    d_yx, _ = nearest(Y, X, threads)
    return float(max(d_xy.max(), d_yx.max()))


def chamfer_value_and_grad(X, Y, threads: int | None = None):
    """Chamfer value and its gradient w.r.t. ``X`` with correspondences held fixed."""
    X = as_cloud(X, "X")
    Y = as_cloud(Y, "Y")
    d_xy, nn_xy = nearest(X, Y, threads)
    d_yx, nn_yx = nearest(Y, X, threads)
    grad = 2.0 * (X - Y[nn_xy]) / X.shape[0]
    np.add.at(grad, nn_yx, 2.0 * (X[nn_yx] - Y) / Y.shape[0])
    value = float(np.mean(d_xy * d_xy) + np.mean(d_yx * d_yx))
    return value, grad


def chamfer_gradient(X, Y, threads: int | None = None) -> np.ndarray:
    return chamfer_value_and_grad(X, Y, threads)[1]


def min_nn_gap(X, Y) -> float:
    """Smallest gap between the first and second nearest neighbour, both directions.

    A small gap means a tiny perturbation could switch a correspondence.
    """
    X = as_cloud(X, "X")
    Y = as_cloud(Y, "Y")
    gaps = []
    for a, b in ((X, Y), (Y, X)):
        if b.shape[0] < 2:
            continue
        d, _ = cKDTree(b).query(a, k=2)
        gaps.append((d[:, 1] - d[:, 0]).min())
    return float(min(gaps)) if gaps else float("inf")
