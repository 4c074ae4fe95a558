"""Lidar scans: KITTI binary I/O, cylindrical range images and scan-line decimation.

A range image has one row per laser ring and one column per azimuth bin.
Row 0 is the topmost ring (``fov_up``); column ``W/2`` looks along +x.
Decimation keeps every ``factor``-th row and returns the *original* points
that occupied those rows, so the low-resolution cloud is an exact subset of
the high-resolution one.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    InvalidInputError,
    InvalidParameterError,
    PathLike,
    as_cloud,
    make_rng,
    normalize_to_unit_sphere,
    read_xyz,
    write_xyz,
)
from .sampling import farthest_point_sample

log = logging.getLogger(__name__)

ROWS = 64
COLS = 2048
FOV_UP = 2.0
FOV_DOWN = -24.8
SENSOR_HEIGHT = 1.73
MIN_RANGE = 1e-9


class ScanParseError(InvalidInputError):
    def __init__(self, msg: str, offset: int | None = None):
        super().__init__(msg)
        self.offset = offset


class EmptyResultError(InvalidInputError):
    pass


# --- scan files ------------------------------------------------------------

def read_scan(path: PathLike, return_skipped: bool = False):
    """Read a KITTI ``.bin`` scan (little-endian float32 ``x y z intensity`` records).

    Intensity is dropped. Records with non-finite coordinates are skipped and
    counted.
    """
    raw = Path(path).read_bytes()
    if len(raw) % 16:
        offset = len(raw) - len(raw) % 16
        raise ScanParseError(f"{path}: {len(raw)} bytes is not a whole number of 16-byte records; "
                             f"truncated record at byte offset {offset}", offset)
    rec = np.frombuffer(raw, dtype="<f4").reshape(-1, 4)
    if rec.shape[0] == 0:
        raise ScanParseError(f"{path}: scan contains no records", 0)
    xyz = rec[:, :3].astype(np.float64)
    good = np.all(np.isfinite(xyz), axis=1)
    skipped = int((~good).sum())
    if skipped:
        log.warning("%s: skipped %d record(s) with non-finite coordinates", path, skipped)
    xyz = xyz[good]
    if xyz.shape[0] == 0:
        raise ScanParseError(f"{path}: no finite records", 0)
    if return_skipped:
        return xyz, skipped
    return xyz


def write_scan(path: PathLike, cloud, intensity=None) -> None:
    pts = as_cloud(cloud)
    rec = np.zeros((pts.shape[0], 4), dtype="<f4")
    rec[:, :3] = pts
    if intensity is not None:
        rec[:, 3] = np.asarray(intensity, dtype=np.float32)
    rec.tofile(path)


# --- range images --------------------------------------------------------

@dataclass(frozen=True)
class RangeImage:
    depth: np.ndarray  # (H, W) range in meters, 0 where empty
    index: np.ndarray  # (H, W) row of ``points`` that owns the cell, -1 where empty
    points: np.ndarray = field(repr=False)
    fov_up: float = FOV_UP
    fov_down: float = FOV_DOWN
    skipped_origin: int = 0
    collisions: int = 0

    @property
    def rows(self) -> int:
        return self.depth.shape[0]

    @property
    def cols(self) -> int:
        return self.depth.shape[1]

    @property
    def occupied(self) -> np.ndarray:
        return self.index >= 0

    @property
    def lost(self) -> int:
        """Input points not represented in any cell."""
        return self.points.shape[0] - int(self.occupied.sum())

    def cell_points(self, rows=None) -> np.ndarray:
        """Original points of occupied cells in row-major order (optionally a row subset)."""
        idx = self.index if rows is None else self.index[rows]
        flat = idx.ravel()
        return self.points[flat[flat >= 0]]

    def to_pgm(self) -> str:
        """Plain PGM (P2) grid of depths in centimeters; 0 marks an empty cell."""
        cm = np.rint(self.depth * 100.0).astype(np.int64).clip(0, 65535)
        lines = ["P2", "# depth [cm], 0 = empty", f"{self.cols} {self.rows}", "65535"]
        lines += [" ".join(map(str, row)) for row in cm.tolist()]
        return "\n".join(lines) + "\n"


def spherical_coords(cloud):
    pts = as_cloud(cloud)
    rng_ = np.sqrt((pts * pts).sum(axis=1))
    azimuth = np.arctan2(pts[:, 1], pts[:, 0])
    with np.errstate(invalid="ignore", divide="ignore"):
        elevation = np.arcsin(np.clip(pts[:, 2] / rng_, -1.0, 1.0))
    return rng_, azimuth, elevation


def rasterize(cloud, rows: int = ROWS, cols: int = COLS, fov_up: float = FOV_UP,
              fov_down: float = FOV_DOWN) -> RangeImage:
    """Project points into an ``rows x cols`` cylindrical grid.

    ``row = floor((fov_up - elevation) / (fov_up - fov_down) * rows)`` clamped to
    the image, ``col = floor((azimuth + pi) / (2 pi) * cols)``. When several
    points share a cell the nearest one wins (lowest index among equal ranges).
    Points closer than 1e-9 m to the origin are skipped.
    """
    pts = as_cloud(cloud)
    if rows < 1 or cols < 1:
        raise InvalidParameterError("rows and cols must be >= 1")
    if not fov_up > fov_down:
        raise InvalidParameterError(f"fov_up ({fov_up}) must exceed fov_down ({fov_down})")
    r, az, el = spherical_coords(pts)
    valid = r >= MIN_RANGE
    skipped = int((~valid).sum())
    ids = np.flatnonzero(valid)
    el_deg = np.degrees(el[ids])
    row = np.floor((fov_up - el_deg) / (fov_up - fov_down) * rows).astype(np.int64)
    row = np.clip(row, 0, rows - 1)
    col = np.floor((az[ids] + math.pi) / (2 * math.pi) * cols).astype(np.int64) % cols
    cell = row * cols + col
    order = np.lexsort((ids, r[ids], cell))
    cell_sorted = cell[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = cell_sorted[1:] != cell_sorted[:-1]
    winners = ids[order[first]]
    win_cells = cell_sorted[first]
    depth = np.zeros(rows * cols)
    index = np.full(rows * cols, -1, dtype=np.int64)
    depth[win_cells] = r[winners]
    index[win_cells] = winners
    return RangeImage(depth.reshape(rows, cols), index.reshape(rows, cols), pts, fov_up, fov_down,
                      skipped_origin=skipped, collisions=int(ids.size - winners.size))


def decimate_rows(img: RangeImage, factor: int = 2, phase: int = 0) -> np.ndarray:
    """Original points of the rows with ``row % factor == phase``."""
    if factor < 2:
        raise InvalidParameterError(f"factor must be >= 2, got {factor}")
    if img.rows % factor:
        raise InvalidParameterError(f"factor {factor} does not divide the row count {img.rows}")
    if not 0 <= phase < factor:
        raise InvalidParameterError(f"phase must be in [0, {factor}), got {phase}")
    kept = img.cell_points(slice(phase, None, factor))
    if kept.shape[0] == 0:
        raise EmptyResultError("decimation left no points")
    return kept


def make_pair(img: RangeImage, factor: int = 2, phase: int = 0):
    """``(low, high)``: decimated points and all occupied-cell points."""
    low = decimate_rows(img, factor, phase)
    high = img.cell_points()
    return low, high


# --- synthetic scans -----------------------------------------------------

def ray_directions(rows: int = ROWS, cols: int = COLS, fov_up: float = FOV_UP, fov_down: float = FOV_DOWN):
    """Unit vectors through every cell center, shape ``(rows, cols, 3)``."""
    el = np.radians(fov_up - (np.arange(rows) + 0.5) / rows * (fov_up - fov_down))
    az = -math.pi + (np.arange(cols) + 0.5) / cols * 2 * math.pi
    el, az = np.meshgrid(el, az, indexing="ij")
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)


def synthetic_scan(rows: int = ROWS, cols: int = COLS, fov_up: float = FOV_UP, fov_down: float = FOV_DOWN,
                   seed: int = 0, occupancy: float = 1.0, range_noise: float = 0.0,
                   sensor_height: float = SENSOR_HEIGHT):
    """A street-canyon scene sampled along the exact cell rays.

    Rays hit a ground plane ``sensor_height`` below the sensor or, failing
    that, a wavy cylindrical wall. Every generating ray maps back to its own
    cell, which makes the rasterizer checkable without real data.
    Returns ``(points, rows_of_points)``.
    """
    rng = make_rng(seed)
    dirs = ray_directions(rows, cols, fov_up, fov_down)
    phase = rng.uniform(0, 2 * math.pi)
    az = np.arctan2(dirs[..., 1], dirs[..., 0])
    wall = 18.0 + 4.0 * np.sin(3 * az + phase) + 1.5 * np.sin(11 * az + 2 * phase)
    horiz = np.sqrt(dirs[..., 0] ** 2 + dirs[..., 1] ** 2)
    t = wall / horiz
    down = dirs[..., 2] < 0
    t_ground = np.where(down, sensor_height / np.where(down, -dirs[..., 2], 1.0), np.inf)
    t = np.minimum(t, t_ground)
    if range_noise > 0:
        t = t + rng.normal(0.0, range_noise, t.shape)
    keep = np.ones(t.shape, dtype=bool)
    if occupancy < 1.0:
        keep = rng.random(t.shape) < occupancy
    pts = (dirs * t[..., None])[keep]
    ring = np.broadcast_to(np.arange(rows)[:, None], (rows, cols))[keep]
    return pts.reshape(-1, 3), ring.copy()


def parallel_lines(n_lines: int = 32, points_per_line: int = 64, spacing: float = 0.1,
                   length: float = 3.2, depth: float = 10.0):
    """Straight horizontal scan lines on a wall at ``x = depth``; returns ``(points, line_ids)``."""
    y = (np.arange(points_per_line) + 0.5) / points_per_line * length - length / 2
    z = np.arange(n_lines) * spacing
    yy, zz = np.meshgrid(y, z)
    pts = np.stack([np.full(yy.size, depth), yy.ravel(), zz.ravel()], axis=1)
    return pts, np.repeat(np.arange(n_lines), points_per_line)


# --- patches --------------------------------------------------------------

@dataclass(frozen=True)
class Patch:
    points: np.ndarray = field(repr=False)
    scan_id: str
    center_index: int
    seed: int
    normalized: bool = False


def extract_patches(cloud, patch_size: int, n_patches: int = 1, seed: int = 0, scan_id: str = "scan",
                    normalize: bool = False) -> list[Patch]:
    """FPS-chosen centers, each expanded to its ``patch_size`` nearest points (center included).

    The FPS start index is drawn from ``seed``; points in a patch are ordered by
    ascending distance from the center, lower index first on ties.
    """
    pts = as_cloud(cloud)
    n = pts.shape[0]
    if not 1 <= patch_size <= n:
        raise InvalidParameterError(f"patch_size must be in [1, {n}], got {patch_size}")
    if not 1 <= n_patches <= n:
        raise InvalidParameterError(f"n_patches must be in [1, {n}], got {n_patches}")
    start = int(make_rng(seed).integers(n))
    centers = farthest_point_sample(pts, n_patches, seed_index=start)
    patches = []
    for c in centers:
        d = pts - pts[c]
        d = np.sqrt((d * d).sum(axis=1))
        order = np.argsort(d, kind="stable")[:patch_size]
        p = pts[order]
        if normalize:
            p = normalize_to_unit_sphere(p).points
        patches.append(Patch(p, scan_id, int(c), int(seed), bool(normalize)))
    return patches


def write_patch_set(directory: PathLike, patches: list[Patch]) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, p in enumerate(patches):
        name = f"patch_{i:03d}.xyz"
        write_xyz(out / name, p.points)
        entries.append({"file": name, "scan_id": p.scan_id, "center_index": p.center_index, "seed": p.seed,
                        "patch_size": int(p.points.shape[0]), "normalized": p.normalized})
    manifest = out / "patches.json"
    manifest.write_text(json.dumps({"patches": entries}, indent=2) + "\n", encoding="utf-8")
    return manifest


def read_patch_set(directory: PathLike) -> list[Patch]:
    root = Path(directory)
    meta = json.loads((root / "patches.json").read_text(encoding="utf-8"))
    return [Patch(read_xyz(root / e["file"]), e["scan_id"], e["center_index"], e["seed"], e["normalized"])
            for e in meta["patches"]]
