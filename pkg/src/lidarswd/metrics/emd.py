"""Earth mover's distance between equal-size clouds.

Two solvers share one contract: a complete bijection and its Euclidean cost.

* :func:`emd_exact` solves the assignment problem to optimality
  (Jonker-Volgenant via :func:`scipy.optimize.linear_sum_assignment`).
* :func:`emd_auction` runs a Gauss-Seidel forward auction with epsilon
  scaling. On termination every bidder is within ``epsilon`` of its best
  net value, so the total cost exceeds the optimum by at most ``N * epsilon``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from ..core import CapacityError, InvalidInputError, InvalidParameterError, as_cloud

EXACT_CAP = 512
AUCTION_CAP = 8192
# eps-scaling: each phase divides epsilon by this factor
SCALING_FACTOR = 6.0
# above this size the auction computes costs on the fly instead of storing N^2 doubles
DENSE_COST_LIMIT = 4096


@dataclass(frozen=True)
class Assignment:
    """Bijection ``mapping[i]`` (index into Y) and its reduced cost."""

    mapping: np.ndarray
    cost: float

    def __post_init__(self):
        m = np.asarray(self.mapping)
        if np.unique(m).size != m.size or m.min() < 0 or m.max() >= m.size:
            raise InvalidInputError("mapping is not a permutation")


def _reduce(total: float, n: int, reduction: str) -> float:
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total / n
    raise InvalidParameterError(f"reduction must be 'sum' or 'mean', got {reduction!r}")


def _check_pair(X, Y):
    X = as_cloud(X, "X")
    Y = as_cloud(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise InvalidInputError(f"EMD needs equal sizes, got {X.shape[0]} and {Y.shape[0]}")
    return X, Y


def assignment_cost(X, Y, mapping, reduction: str = "sum") -> float:
    d = X - Y[mapping]
    total = float(np.sqrt((d * d).sum(axis=1)).sum())
    return _reduce(total, X.shape[0], reduction)


def emd_exact(X, Y, reduction: str = "mean", cap: int = EXACT_CAP):
    """Optimal bijection cost; returns ``(value, Assignment)``."""
    X, Y = _check_pair(X, Y)
    n = X.shape[0]
    _reduce(0.0, 1, reduction)
    if n > cap:
        raise CapacityError(f"emd_exact is capped at N <= {cap} (got {n}); raise the cap or use emd_auction")
    C = cdist(X, Y)
    rows, cols = linear_sum_assignment(C)
    mapping = np.empty(n, dtype=np.intp)
    mapping[rows] = cols
    # recompute from coordinates so the Assignment reproduces the value exactly
    value = assignment_cost(X, Y, mapping, reduction)
    return value, Assignment(mapping, value)


@numba.njit(cache=True)
def _auction_dense(C, eps_schedule):
    n = C.shape[0]
    prices = np.zeros(n)
    owner = np.full(n, -1, dtype=np.int64)
    assigned = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    for eps in eps_schedule:
        owner[:] = -1
        assigned[:] = -1
        for k in range(n):
            stack[k] = n - 1 - k
        top = n
        while top > 0:
            top -= 1
            i = stack[top]
            best = -np.inf
            second = -np.inf
            jbest = -1
            for j in range(n):
                v = -C[i, j] - prices[j]
                if v > best:
                    second = best
                    best = v
                    jbest = j
                elif v > second:
                    second = v
            prices[jbest] += best - second + eps
            prev = owner[jbest]
            owner[jbest] = i
            assigned[i] = jbest
            if prev >= 0:
                assigned[prev] = -1
                stack[top] = prev
                top += 1
    return assigned


@numba.njit(cache=True)
def _auction_points(X, Y, eps_schedule):
    n = X.shape[0]
    prices = np.zeros(n)
    owner = np.full(n, -1, dtype=np.int64)
    assigned = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    for eps in eps_schedule:
        owner[:] = -1
        assigned[:] = -1
        for k in range(n):
            stack[k] = n - 1 - k
        top = n
        while top > 0:
            top -= 1
            i = stack[top]
            xi0 = X[i, 0]
            xi1 = X[i, 1]
            xi2 = X[i, 2]
            best = -np.inf
            second = -np.inf
            jbest = -1
            for j in range(n):
                a = xi0 - Y[j, 0]
                b = xi1 - Y[j, 1]
                c = xi2 - Y[j, 2]
                v = -np.sqrt(a * a + b * b + c * c) - prices[j]
                if v > best:
                    second = best
                    best = v
                    jbest = j
                elif v > second:
                    second = v
            prices[jbest] += best - second + eps
            prev = owner[jbest]
            owner[jbest] = i
            assigned[i] = jbest
            if prev >= 0:
                assigned[prev] = -1
                stack[top] = prev
                top += 1
    return assigned


def epsilon_schedule(max_cost: float, epsilon: float, factor: float = SCALING_FACTOR) -> np.ndarray:
    """Decreasing epsilons from ``max_cost / factor`` down to exactly ``epsilon``."""
    eps = [epsilon]
    e = epsilon * factor
    while e < max_cost / factor:
        eps.append(e)
        e *= factor
    return np.array(eps[::-1], dtype=np.float64)


def auction_assign(X, Y, epsilon: float = 1e-3, cap: int = AUCTION_CAP) -> np.ndarray:
    """Auction bijection ``mapping[i]`` -> index into Y."""
    X, Y = _check_pair(X, Y)
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon}")
    n = X.shape[0]
    if n > cap:
        raise CapacityError(f"emd_auction is capped at N <= {cap} (got {n})")
    if n == 1:
        return np.zeros(1, dtype=np.intp)
    X = np.ascontiguousarray(X)
    Y = np.ascontiguousarray(Y)
    # upper bound on any pairwise distance without forming all of them
    lo = np.minimum(X.min(axis=0), Y.min(axis=0))
    hi = np.maximum(X.max(axis=0), Y.max(axis=0))
    max_cost = float(np.linalg.norm(hi - lo))
    schedule = epsilon_schedule(max_cost, float(epsilon))
    if n <= DENSE_COST_LIMIT:
        mapping = _auction_dense(cdist(X, Y), schedule)
    else:
        mapping = _auction_points(X, Y, schedule)
    return mapping.astype(np.intp)


def emd_auction(X, Y, epsilon: float = 1e-3, reduction: str = "mean", cap: int = AUCTION_CAP) -> float:
    """Cost of the epsilon-scaling auction bijection (within ``N * epsilon`` of optimal, sum reduction)."""
    X, Y = _check_pair(X, Y)
    _reduce(0.0, 1, reduction)
    mapping = auction_assign(X, Y, epsilon, cap)
    return assignment_cost(X, Y, mapping, reduction)


def emd_assignment_grad(X, Y, mapping, reduction: str = "mean") -> np.ndarray:
    """Gradient of the assignment cost w.r.t. ``X`` for a fixed bijection."""
    d = X - Y[mapping]
    norm = np.sqrt((d * d).sum(axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(norm[:, None] > 0, d / norm[:, None], 0.0)
    if reduction == "mean":
        g /= X.shape[0]
    return g
