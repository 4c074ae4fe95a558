"""Free-point upsampling: the output coordinates themselves are the parameters.

Plain fixed-step gradient descent on one of three losses (sliced Wasserstein,
Chamfer, auction EMD). With ``resample_directions="per-step"`` each step
draws fresh directions from a seed derived from ``(seed, step)``, so runs are
reproducible bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.spatial import cKDTree

from .core import InvalidInputError, InvalidParameterError, as_cloud, make_rng, sample_directions
from .metrics.emd import assignment_cost, auction_assign, emd_assignment_grad
from .metrics.nearest import chamfer_value_and_grad
from .metrics.sliced import swd_value_and_grad

LOSSES = ("swd", "chamfer", "emd-auction")
DIVERGENCE_FACTOR = 1e6


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizationConfig:
    loss: str = "swd"
    iterations: int = 500
    step_size: float = 1.0
    directions_per_step: int = 64
    upsample_ratio: int = 2
    init_jitter_sigma: float = 0.0
    seed: int = 0
    resample_directions: str = "per-step"
    auction_epsilon: float = 1e-3
    threads: int | None = None

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise InvalidParameterError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.iterations < 1:
            raise InvalidParameterError("iterations must be >= 1")
        if not self.step_size > 0:
            raise InvalidParameterError("step_size must be > 0")
        if self.directions_per_step < 1:
            raise InvalidParameterError("directions_per_step must be >= 1")
        if self.upsample_ratio < 1:
            raise InvalidParameterError("upsample_ratio must be >= 1")
        if self.resample_directions not in ("per-step", "fixed"):
            raise InvalidParameterError("resample_directions must be 'per-step' or 'fixed'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizationConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass
class OptimizationTrace:
    losses: np.ndarray  # loss before each step
    final: np.ndarray = field(repr=False)
    wall_time: float
    config: OptimizationConfig

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("step", "loss"))
        for i, v in enumerate(self.losses.tolist()):
            w.writerow((i, repr(v)))
        return buf.getvalue()


def init_upsample(source, ratio: int = 2, sigma: float = 0.0, seed: int = 0) -> np.ndarray:
    """``ratio`` stacked copies of ``source``; every copy after the first gets Gaussian jitter."""
    src = as_cloud(source, "source")
    if ratio < 1:
        raise InvalidParameterError(f"ratio must be >= 1, got {ratio}")
    if not sigma >= 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    copies = [src.copy()]
    if ratio > 1:
        noise = make_rng(seed).standard_normal((ratio - 1, *src.shape))
        copies += [src + sigma * noise[k] for k in range(ratio - 1)]
    return np.concatenate(copies, axis=0)


def step_directions(cfg: OptimizationConfig, step: int):
    if cfg.resample_directions == "fixed":
        return sample_directions(cfg.directions_per_step, cfg.seed)
    sub = int(make_rng(cfg.seed, step).integers(2**62))
    return sample_directions(cfg.directions_per_step, sub)


def loss_and_grad(X, target, cfg: OptimizationConfig, step: int, dirs=None):
    if cfg.loss == "swd":
        return swd_value_and_grad(X, target, dirs if dirs is not None else step_directions(cfg, step), cfg.threads)
    if cfg.loss == "chamfer":
        return chamfer_value_and_grad(X, target, cfg.threads)
    mapping = auction_assign(X, target, cfg.auction_epsilon)
    return assignment_cost(X, target, mapping, "mean"), emd_assignment_grad(X, target, mapping, "mean")


def minimize(init, target, cfg: OptimizationConfig, dirs=None) -> OptimizationTrace:
    """Fixed-step gradient descent of ``cfg.loss`` from ``init`` towards ``target``.

    ``dirs`` overrides the direction set for every step (sliced loss only).
    Aborts with :class:`DivergenceError` once the loss exceeds 1e6 times its
    initial value.
    """
    X = as_cloud(init, "init").copy()
    Y = as_cloud(target, "target")
    if cfg.loss != "chamfer" and X.shape[0] != Y.shape[0]:
        raise InvalidInputError(f"{cfg.loss} loss needs |init| == |target| ({X.shape[0]} vs {Y.shape[0]})")
    losses = np.empty(cfg.iterations)
    t0 = time.perf_counter()
    first = None
    for step in range(cfg.iterations):
        value, grad = loss_and_grad(X, Y, cfg, step, dirs)
        if first is None:
            first = value
        elif value > DIVERGENCE_FACTOR * first and first > 0 or not math.isfinite(value):
            raise DivergenceError(f"loss {value:.3e} at step {step} exceeds {DIVERGENCE_FACTOR:g} x initial {first:.3e}")
        losses[step] = value
        X -= cfg.step_size * grad
    return OptimizationTrace(losses, X, time.perf_counter() - t0, cfg)


def upsample(source, target, cfg: OptimizationConfig, dirs=None) -> OptimizationTrace:
    """Initialize ``upsample_ratio`` jittered copies of ``source`` and optimize them towards ``target``."""
    init = init_upsample(source, cfg.upsample_ratio, cfg.init_jitter_sigma, cfg.seed)
    return minimize(init, target, cfg, dirs)


def line_occupancy(points, target, line_ids, spacing: float) -> float:
    """Fraction of target lines with at least one point closer than ``spacing / 2`` to that line's points."""
    pts = as_cloud(points, "points")
    tgt = as_cloud(target, "target")
    line_ids = np.asarray(line_ids)
    if line_ids.shape[0] != tgt.shape[0]:
        raise InvalidInputError("line_ids must label every target point")
    lines = np.unique(line_ids)
    hit = 0
    for line in lines:
        d, _ = cKDTree(tgt[line_ids == line]).query(pts, k=1)
        hit += bool((d < 0.5 * spacing).any())
    return hit / lines.size
