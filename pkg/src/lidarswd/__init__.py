"""Optimal-transport point-set metrics, lidar scan decimation, and sliced-Wasserstein upsampling."""

__version__ = "0.1.0"

from .core import (
    CapacityError,
    DirectionSet,
    InvalidInputError,
    InvalidParameterError,
    Normalization,
    RigidPerturbation,
    jitter,
    load_cloud,
    make_rng,
    normalize_to_unit_sphere,
    read_xyz,
    rotate_yaw,
    sample_directions,
    write_xyz,
)
from .metrics import (
    MetricConfig,
    MetricReport,
    chamfer,
    chamfer_gradient,
    emd_auction,
    emd_exact,
    evaluate_pair,
    hausdorff,
    sinkhorn,
    sinkhorn_divergence,
    swd,
    swd_gradient,
)

__all__ = [
    "CapacityError",
    "DirectionSet",
    "InvalidInputError",
    "InvalidParameterError",
    "MetricConfig",
    "MetricReport",
    "Normalization",
    "RigidPerturbation",
    "chamfer",
    "chamfer_gradient",
    "emd_auction",
    "emd_exact",
    "evaluate_pair",
    "hausdorff",
    "jitter",
    "load_cloud",
    "make_rng",
    "normalize_to_unit_sphere",
    "read_xyz",
    "rotate_yaw",
    "sample_directions",
    "sinkhorn",
    "sinkhorn_divergence",
    "swd",
    "swd_gradient",
    "write_xyz",
]
