from .emd import Assignment, assignment_cost, auction_assign, emd_auction, emd_exact
from .nearest import chamfer, chamfer_gradient, chamfer_value_and_grad, hausdorff
from .report import (
    MetricConfig,
    MetricReport,
    aggregate,
    evaluate_pair,
    reports_from_csv,
    reports_to_csv,
    reports_to_json,
)
from .sinkhorn import sinkhorn, sinkhorn_divergence, sinkhorn_solve
from .sliced import per_direction, swd, swd_gradient, swd_value_and_grad

__all__ = [
    "Assignment",
    "MetricConfig",
    "MetricReport",
    "aggregate",
    "assignment_cost",
    "auction_assign",
    "chamfer",
    "chamfer_gradient",
    "chamfer_value_and_grad",
    "emd_auction",
    "emd_exact",
    "evaluate_pair",
    "hausdorff",
    "per_direction",
    "reports_from_csv",
    "reports_to_csv",
    "reports_to_json",
    "sinkhorn",
    "sinkhorn_divergence",
    "sinkhorn_solve",
    "swd",
    "swd_gradient",
    "swd_value_and_grad",
]
