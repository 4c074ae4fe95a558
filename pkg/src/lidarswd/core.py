"""Point-cloud primitives shared by every other module.

Clouds are plain ``(N, 3)`` float64 numpy arrays; row order is the point
identity and is never changed by the transforms below. All randomness goes
through :func:`make_rng`, which builds a PCG64 generator from an explicit
integer seed (optionally extended with sub-keys, e.g. a step index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

PathLike = Union[str, Path]


class InvalidInputError(ValueError):
    """Malformed point data (empty clouds, size mismatches, NaNs)."""


class InvalidParameterError(ValueError):
    """A scalar parameter is outside its documented domain."""


class CapacityError(ValueError):
    """Problem size exceeds a documented practical cap."""


def as_cloud(points, name: str = "cloud") -> np.ndarray:
    """Validate and convert ``points`` to a read-only-safe ``(N, 3)`` float64 array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInputError(f"{name} must have shape (N, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite coordinates")
    return arr


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator for ``seed``; extra ``keys`` derive independent streams."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True)
class DirectionSet:
    """Unit directions on the sphere used by the sliced estimator."""

    directions: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=np.float64)
        if d.ndim == 1:
            d = d.reshape(1, -1)
        if d.ndim != 2 or d.shape[0] == 0 or d.shape[1] != 3:
            raise InvalidParameterError(f"directions must have shape (L, 3), got {d.shape}")
        norms = np.linalg.norm(d, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise InvalidParameterError("directions must be unit vectors")
        d = np.ascontiguousarray(d)
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)

    def __len__(self) -> int:
        return self.directions.shape[0]

    def rotated_yaw(self, angle: float) -> "DirectionSet":
        return DirectionSet(rotate_yaw(self.directions, angle), seed=self.seed)


def sample_directions(count: int, seed: int) -> DirectionSet:
    """Draw ``count`` i.i.d. uniform directions by normalizing 3D standard normals."""
    if int(count) < 1:
        raise InvalidParameterError(f"direction count must be >= 1, got {count}")
    rng = make_rng(seed)
    g = rng.standard_normal((int(count), 3))
    norms = np.linalg.norm(g, axis=1)
    # a zero draw has probability 0, but keep the map total
    while np.any(norms == 0.0):
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(g, axis=1)
    return DirectionSet(g / norms[:, None], seed=int(seed))


def jitter(cloud, sigma: float, seed: int) -> np.ndarray:
    """Add i.i.d. N(0, sigma^2) noise to every coordinate."""
    pts = as_cloud(cloud)
    if not math.isfinite(sigma) or sigma < 0:
        raise InvalidParameterError(f"sigma must be finite and >= 0, got {sigma}")
    if sigma == 0:
        return pts.copy()
    noise = make_rng(seed).standard_normal(pts.shape)
    return pts + sigma * noise


def yaw_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotate_yaw(cloud, angle: float) -> np.ndarray:
    """Rotate about the z axis by ``angle`` radians (counter-clockwise)."""
    if not math.isfinite(angle):
        raise InvalidParameterError(f"angle must be finite, got {angle}")
    pts = as_cloud(cloud)
    if angle == 0:
        return pts.copy()
    c, s = math.cos(angle), math.sin(angle)
    out = np.empty_like(pts)
    out[:, 0] = c * pts[:, 0] - s * pts[:, 1]
    out[:, 1] = s * pts[:, 0] + c * pts[:, 1]
    out[:, 2] = pts[:, 2]
    return out


@dataclass(frozen=True)
class RigidPerturbation:
    kind: str  # "gaussian-jitter" | "yaw-rotation"
    magnitude: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian-jitter", "yaw-rotation"):
            raise InvalidParameterError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "gaussian-jitter" and not self.magnitude >= 0:
            raise InvalidParameterError("jitter sigma must be >= 0")

    @property
    def reported_magnitude(self) -> float:
        if self.kind == "yaw-rotation":
            return math.fmod(self.magnitude, 2 * math.pi)
        return self.magnitude

    def apply(self, cloud) -> np.ndarray:
        if self.kind == "gaussian-jitter":
            return jitter(cloud, self.magnitude, self.seed)
        return rotate_yaw(cloud, self.magnitude)


@dataclass(frozen=True)
class Normalization:
    """Result of :func:`normalize_to_unit_sphere`; ``invert`` undoes it."""

    points: np.ndarray
    center: np.ndarray = field(repr=False)
    scale: float = 1.0

    def invert(self, points=None) -> np.ndarray:
        pts = self.points if points is None else as_cloud(points)
        return pts * self.scale + self.center


def normalize_to_unit_sphere(cloud) -> Normalization:
    """Center on the centroid and scale so the farthest point has norm 1.

    A cloud whose points all coincide keeps ``scale = 1``.
    """
    pts = as_cloud(cloud)
    if np.all(pts == pts[0]):
        # the float mean of identical values can miss them by an ulp
        return Normalization(np.zeros_like(pts), pts[0].copy(), 1.0)
    center = pts.mean(axis=0)
    shifted = pts - center
    radius = _max_norm(shifted)
    scale = radius if radius > 0 else 1.0
    return Normalization(shifted / scale, center, scale)


def _max_norm(points: np.ndarray) -> float:
    # hypot avoids squaring tiny coordinates to zero
    return float(np.hypot(np.hypot(points[:, 0], points[:, 1]), points[:, 2]).max())


def cloud_radius(cloud) -> float:
    pts = as_cloud(cloud)
    return _max_norm(pts - pts.mean(axis=0))


# --- serialization -------------------------------------------------------

def write_xyz(path: PathLike, cloud) -> None:
    """One ``x y z`` line per point, shortest round-trip float repr."""
    pts = as_cloud(cloud)
    lines = [f"{x!r} {y!r} {z!r}" for x, y, z in pts.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_xyz(path: PathLike) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 3:
                raise InvalidInputError(f"{path}:{lineno}: expected 'x y z', got {line!r}")
            rows.append([float(v) for v in parts[:3]])
    return as_cloud(np.array(rows, dtype=np.float64).reshape(-1, 3), name=str(path))


def write_points_bin(path: PathLike, cloud) -> None:
    """Little-endian float32 triples, no header."""
    as_cloud(cloud).astype("<f4").tofile(path)


def read_points_bin(path: PathLike) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) % 12:
        raise InvalidInputError(f"{path}: length {len(raw)} is not a multiple of 12 bytes "
                                f"(trailing record at byte offset {len(raw) - len(raw) % 12})")
    return as_cloud(np.frombuffer(raw, dtype="<f4").reshape(-1, 3).astype(np.float64), name=str(path))


def load_cloud(path: PathLike) -> np.ndarray:
    """Load by extension: ``.xyz``/``.txt`` text, ``.bin`` KITTI scan, ``.f32`` float32 triples."""
    suffix = Path(path).suffix.lower()
    if suffix in (".xyz", ".txt"):
        return read_xyz(path)
    if suffix == ".bin":
        from .lidar_io import read_scan

        return read_scan(path)
    if suffix == ".f32":
        return read_points_bin(path)
    raise InvalidInputError(f"unsupported point-cloud extension {suffix!r} for {path}")

