"""Log-domain Sinkhorn with uniform marginals and Euclidean ground cost.

Used as a comparison baseline only. Potentials ``f, g`` parametrize the plan
``P_ij = a_i b_j exp((f_i + g_j - C_ij) / reg)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..core import InvalidParameterError, as_cloud

MARGINAL_TOL = 1e-9
# iterations spent at each intermediate regularization when annealing
ANNEAL_ITERS = 20


@dataclass
class SinkhornResult:
    cost: float  # <P, C>
    dual: float  # <a, f> + <b, g>, the entropic objective at convergence
    iterations: int
    marginal_error: float
    f: np.ndarray
    g: np.ndarray


def _lse_rows(K, shift, buf):
    """``log sum_j exp(K_ij + shift_j)`` for every row, using ``buf`` as scratch."""
    np.add(K, shift[None, :], out=buf)
    peak = buf.max(axis=1)
    buf -= peak[:, None]
    np.exp(buf, out=buf)
    return np.log(buf.sum(axis=1)) + peak


def _solve(C, reg, max_iters, anneal=True) -> SinkhornResult:
    n, m = C.shape
    log_a = np.full(n, -np.log(n))
    log_b = np.full(m, -np.log(m))
    f = np.zeros(n)
    g = np.zeros(m)
    Ct = np.ascontiguousarray(C.T)
    buf = np.empty((n, m))
    buf_t = np.empty((m, n))

    def sweep(f, g, eps, K, Kt):
        f = -eps * _lse_rows(K, g / eps + log_b, buf)
        g = -eps * _lse_rows(Kt, f / eps + log_a, buf_t)
        return f, g

    if anneal:
        eps = max(float(C.max()), reg)
        while eps > reg:
            K, Kt = C / -eps, Ct / -eps
            for _ in range(ANNEAL_ITERS):
                f, g = sweep(f, g, eps, K, Kt)
            eps *= 0.5

    K, Kt = C / -reg, Ct / -reg
    f, g = sweep(f, g, reg, K, Kt)
    err = np.inf
    it = 1
    while it < max_iters:
        f_next = -reg * _lse_rows(K, g / reg + log_b, buf)
        # row sums of the current plan are a * exp((f - f_next) / reg); columns are exact
        err = float(np.abs(np.expm1((f - f_next) / reg)).sum() / n)
        if err < MARGINAL_TOL:
            break
        f = f_next
        g = -reg * _lse_rows(Kt, f / reg + log_a, buf_t)
        it += 1
    logP = (f[:, None] + g[None, :] - C) / reg + log_a[:, None] + log_b[None, :]
    P = np.exp(logP)
    cost = float((P * C).sum())
    dual = float(np.exp(log_a) @ f + np.exp(log_b) @ g)
    return SinkhornResult(cost, dual, it, err, f, g)


def sinkhorn_solve(X, Y, regularization: float = 0.01, max_iters: int = 1000, anneal: bool = True):
    X = as_cloud(X, "X")
    Y = as_cloud(Y, "Y")
    if not regularization > 0:
        raise InvalidParameterError(f"regularization must be > 0, got {regularization}")
    if int(max_iters) < 1:
        raise InvalidParameterError("max_iters must be >= 1")
    return _solve(cdist(X, Y), float(regularization), int(max_iters), anneal)


def sinkhorn(X, Y, regularization: float = 0.01, max_iters: int = 1000) -> float:
    """Transport cost ``<P, C>`` of the entropic plan."""
    return max(0.0, sinkhorn_solve(X, Y, regularization, max_iters).cost)


def sinkhorn_divergence(X, Y, regularization: float = 0.01, max_iters: int = 1000) -> float:
    """Debiased ``OT(X,Y) - (OT(X,X) + OT(Y,Y)) / 2`` on the entropic objective; zero on identical inputs."""
    xy = sinkhorn_solve(X, Y, regularization, max_iters).dual
    xx = sinkhorn_solve(X, X, regularization, max_iters).dual
    yy = xx if np.array_equal(X, Y) else sinkhorn_solve(Y, Y, regularization, max_iters).dual
    return max(0.0, xy - 0.5 * (xx + yy))
