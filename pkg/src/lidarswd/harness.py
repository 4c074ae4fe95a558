"""Sensitivity sweeps (jitter, yaw rotation) and batch evaluation of paired clouds.

A sweep perturbs one cloud by increasing amounts and records every metric
between the original and the perturbed copy. Each curve is also reported
divided by its own maximum. All sweep points of one run share a single
direction set so curve shape never reflects direction resampling.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._parallel import resolve_threads
from .core import (
    DirectionSet,
    InvalidParameterError,
    PathLike,
    as_cloud,
    cloud_radius,
    jitter,
    load_cloud,
    make_rng,
    normalize_to_unit_sphere,
    rotate_yaw,
)
from .metrics.emd import emd_auction, emd_exact
from .metrics.nearest import chamfer, hausdorff
from .metrics.report import MetricConfig, MetricReport, aggregate, evaluate_pair
from .metrics.sinkhorn import sinkhorn_divergence
from .metrics.sliced import swd

METRICS = ("cd", "hd", "emd", "swd", "sinkhorn")
DEFAULT_METRICS = ("cd", "hd", "emd", "swd")
CLOUD_SUFFIXES = (".xyz", ".txt", ".bin", ".f32")


def normalize_curve(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    peak = v.max() if v.size else 0.0
    if peak == 0:
        return np.zeros_like(v)
    return v / peak


def metric_function(name: str, cfg: MetricConfig, dirs: DirectionSet):
    if name == "cd":
        return lambda a, b: chamfer(a, b, cfg.threads)
    if name == "hd":
        return lambda a, b: hausdorff(a, b, cfg.threads)
    if name == "swd":
        return lambda a, b: swd(a, b, dirs, cfg.threads)
    if name == "sinkhorn":
        return lambda a, b: sinkhorn_divergence(a, b, cfg.sinkhorn_regularization, cfg.sinkhorn_max_iters)
    if name == "emd":
        def emd(a, b):
            if a.shape[0] <= cfg.exact_cap:
                return emd_exact(a, b, cfg.emd_reduction, cap=cfg.exact_cap)[0]
            return emd_auction(a, b, cfg.auction_epsilon, cfg.emd_reduction, cap=cfg.auction_cap)
        return emd
    raise InvalidParameterError(f"unknown metric {name!r}; choose from {METRICS}")


@dataclass
class SweepResult:
    kind: str  # "jitter" | "rotation"
    magnitudes: np.ndarray
    metrics: tuple[str, ...]
    raw: dict[str, np.ndarray]
    normalized: dict[str, np.ndarray] = field(init=False)
    seeds: dict = field(default_factory=dict)
    input_normalized: bool = False

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        if mags.size > 1 and not np.all(np.diff(mags) > 0):
            raise InvalidParameterError("sweep magnitudes must be strictly ascending")
        self.magnitudes = mags
        self.normalized = {m: normalize_curve(self.raw[m]) for m in self.metrics}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("magnitude", "metric", "raw", "normalized"))
        for i, mag in enumerate(self.magnitudes.tolist()):
            for m in self.metrics:
                w.writerow((repr(mag), m, repr(float(self.raw[m][i])), repr(float(self.normalized[m][i]))))
        return buf.getvalue()

    def manifest(self) -> dict:
        return {
            "kind": self.kind,
            "metrics": list(self.metrics),
            "magnitudes": self.magnitudes.tolist(),
            "seeds": self.seeds,
            "normalization": "divide-by-curve-max",
            "input_normalized": self.input_normalized,
            "shared_direction_set": True,
        }


def default_sigmas(radius: float, levels: int = 20, low: float = 1e-3, high: float = 0.1) -> np.ndarray:
    """``0`` followed by ``levels - 1`` log-spaced values in ``[low, high] * radius``."""
    return np.concatenate([[0.0], np.geomspace(low, high, levels - 1) * radius])


def default_angles(levels: int = 25) -> np.ndarray:
    return np.linspace(0.0, 2 * math.pi, levels)


def _prepare(cloud, normalize_input: bool):
    pts = as_cloud(cloud)
    if normalize_input:
        pts = normalize_to_unit_sphere(pts).points
    return pts


def _run(pts, perturbed_fn, n, metrics, cfg, dirs):
    fns = {m: metric_function(m, cfg, dirs) for m in metrics}

    def row(i):
        other = perturbed_fn(i)
        return [fns[m](pts, other) for m in metrics]

    workers = resolve_threads(cfg.threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, range(n)))
    else:
        rows = [row(i) for i in range(n)]
    arr = np.array(rows, dtype=np.float64).reshape(n, len(metrics))
    return {m: arr[:, j] for j, m in enumerate(metrics)}


def jitter_seed(seed: int, level: int) -> int:
    return int(make_rng(seed, level).integers(2**62))


def jitter_sweep(cloud, sigmas=None, metrics=DEFAULT_METRICS, cfg: MetricConfig | None = None, seed: int = 0,
                 normalize_input: bool = False, dirs: DirectionSet | None = None) -> SweepResult:
    """Distances between ``cloud`` and ``jitter(cloud, sigma)`` for each sigma (first sigma must be 0)."""
    cfg = cfg or MetricConfig()
    pts = _prepare(cloud, normalize_input)
    sig = default_sigmas(cloud_radius(pts)) if sigmas is None else np.asarray(sigmas, dtype=np.float64)
    if sig.size == 0 or sig[0] != 0:
        raise InvalidParameterError("sigmas must start at 0")
    metrics = tuple(metrics)
    dirs = dirs or cfg.directions()
    raw = _run(pts, lambda i: jitter(pts, float(sig[i]), jitter_seed(seed, i)), sig.size, metrics, cfg, dirs)
    seeds = {"jitter_seed": int(seed), "direction_seed": dirs.seed, "directions": len(dirs)}
    return SweepResult("jitter", sig, metrics, raw, seeds, normalize_input)


def rotation_sweep(cloud, angles=None, metrics=DEFAULT_METRICS, cfg: MetricConfig | None = None,
                   normalize_input: bool = False, dirs: DirectionSet | None = None) -> SweepResult:
    """Distances between ``cloud`` and its yaw rotation for each angle in ``[0, 2 pi]``."""
    cfg = cfg or MetricConfig()
    pts = _prepare(cloud, normalize_input)
    ang = default_angles() if angles is None else np.asarray(angles, dtype=np.float64)
    if ang.size < 2 or ang[0] != 0 or abs(ang[-1] - 2 * math.pi) > 1e-12:
        raise InvalidParameterError("angles must run from 0 to 2*pi inclusive")
    metrics = tuple(metrics)
    dirs = dirs or cfg.directions()
    raw = _run(pts, lambda i: rotate_yaw(pts, float(ang[i])), ang.size, metrics, cfg, dirs)
    seeds = {"direction_seed": dirs.seed, "directions": len(dirs)}
    return SweepResult("rotation", ang, metrics, raw, seeds, normalize_input)


@dataclass
class DatasetEvaluation:
    reports: list[MetricReport]
    aggregate: MetricReport | None
    unmatched: list[str]

    @property
    def ok(self) -> bool:
        return not self.unmatched


def _cloud_files(directory: Path) -> dict[str, Path]:
    return {p.name: p for p in sorted(directory.iterdir()) if p.is_file() and p.suffix.lower() in CLOUD_SUFFIXES}


def evaluate_dataset(pred_dir: PathLike, gt_dir: PathLike, cfg: MetricConfig | None = None) -> DatasetEvaluation:
    """Evaluate every prediction against the ground-truth file of the same name.

    Files present on only one side are listed in ``unmatched`` and skipped.
    """
    cfg = cfg or MetricConfig()
    preds = _cloud_files(Path(pred_dir))
    gts = _cloud_files(Path(gt_dir))
    names = sorted(set(preds) & set(gts))
    unmatched = sorted(set(preds) ^ set(gts))
    dirs = cfg.directions()
    reports = [evaluate_pair(load_cloud(preds[n]), load_cloud(gts[n]), cfg, pair_id=n, dirs=dirs) for n in names]
    agg = aggregate(reports) if reports else None
    return DatasetEvaluation(reports, agg, unmatched)
