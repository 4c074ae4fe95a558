"""Central finite-difference checks of the analytic point gradients."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .core import InvalidParameterError, make_rng, sample_directions
from .metrics.nearest import chamfer, chamfer_gradient, min_nn_gap
from .metrics.sliced import min_tie_gap, swd, swd_gradient

TOLERANCE = 1e-4
STEP = 1e-5


def finite_difference(fn, X: np.ndarray, h: float = STEP) -> np.ndarray:
    """Central differences of scalar ``fn`` w.r.t. every coordinate of ``X``."""
    X = np.array(X, dtype=np.float64)
    g = np.empty_like(X)
    for idx in np.ndindex(X.shape):
        orig = X[idx]
        X[idx] = orig + h
        up = fn(X)
        X[idx] = orig - h
        down = fn(X)
        X[idx] = orig
        g[idx] = (up - down) / (2 * h)
    return g


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``max |a - n| / max |n|`` (absolute when the numeric gradient vanishes)."""
    scale = float(np.abs(numeric).max())
    err = float(np.abs(analytic - numeric).max())
    return err / scale if scale > 0 else err


@dataclass
class GradCheckRow:
    config: int
    seed: int
    tie_gap: float
    rel_error: float

    def passed(self, tol: float = TOLERANCE) -> bool:
        return self.rel_error < tol


def random_config(loss: str, n: int, n_dirs: int, seed: int):
    rng = make_rng(seed)
    X = rng.random((n, 3))
    Y = rng.random((n, 3))
    dirs = sample_directions(n_dirs, int(rng.integers(2**62))) if loss == "swd" else None
    return X, Y, dirs


def check_config(loss: str, X, Y, dirs=None, h: float = STEP):
    """Return ``(relative error, tie gap)`` for one configuration."""
    if loss == "swd":
        analytic = swd_gradient(X, Y, dirs)
        numeric = finite_difference(lambda Z: swd(Z, Y, dirs), X, h)
        gap = min_tie_gap(X, Y, dirs)
    elif loss == "chamfer":
        analytic = chamfer_gradient(X, Y)
        numeric = finite_difference(lambda Z: chamfer(Z, Y), X, h)
        gap = min_nn_gap(X, Y)
    else:
        raise InvalidParameterError(f"gradcheck supports 'swd' and 'chamfer', got {loss!r}")
    return relative_error(analytic, numeric), gap


def run_gradcheck(loss: str, n: int = 24, n_dirs: int = 8, seed: int = 0, configs: int = 1,
                  h: float = STEP, max_draws: int | None = None) -> list[GradCheckRow]:
    """Check ``configs`` random configurations.

    Configurations with a sort/nearest-neighbour tie closer than ``2h`` (the
    difference stencil could straddle the kink) are skipped and redrawn.
    """
    rows: list[GradCheckRow] = []
    draw = 0
    max_draws = max_draws or 20 * configs
    while len(rows) < configs and draw < max_draws:
        cfg_seed = int(make_rng(seed, draw).integers(2**62))
        draw += 1
        X, Y, dirs = random_config(loss, n, n_dirs, cfg_seed)
        if loss == "swd":
            gap = min_tie_gap(X, Y, dirs)
        else:
            gap = min_nn_gap(X, Y)
        if gap < 2 * h:
            continue
        err, gap = check_config(loss, X, Y, dirs, h)
        rows.append(GradCheckRow(len(rows), cfg_seed, gap, err))
    return rows


def rows_to_csv(rows: list[GradCheckRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("config", "seed", "tie_gap", "rel_error"))
    for r in rows:
        w.writerow((r.config, r.seed, repr(r.tie_gap), repr(r.rel_error)))
    return buf.getvalue()
